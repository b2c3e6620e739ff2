"""Command-line driver.

Exit status: 0 on success, 1 when a verification fails, 2 on usage or
scenario errors. Reports go to ``--out`` or, failing that, to stdout.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from cerank import checks, diversity, equilibrium, mechanism, ranking, simulator
from cerank.model import Ranking, click_probability, expected_utility
from cerank.ranking import RankingVariant, SizeGuardError, Variant
from cerank.scenario_io import (
    RandomInstanceSpec,
    Report,
    ReportRow,
    Scenario,
    ScenarioError,
    generate_instances,
    load_scenario,
    render_report,
    write_report,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ORACLE_TOL = 1e-12
DEFAULT_TRIALS = 100_000


class UsageError(Exception):
    pass


def _need(scenario: Scenario | None, *kinds: str) -> Scenario:
    if scenario is None:
        raise UsageError("--scenario is required")
    if scenario.kind not in kinds:
        raise UsageError(f"scenario kind {scenario.kind!r} not usable here; expected {' or '.join(kinds)}")
    return scenario


def _variant(name: str, scenario: Scenario, k: float | None) -> RankingVariant:
    try:
        tag = Variant(name)
    except ValueError:
        raise UsageError(f"unknown variant {name!r}; choose from {[v.value for v in Variant]}") from None
    if tag == Variant.RELEVANCE_SQUARED_OVER_K:
        k = k if k is not None else scenario.k
        if k is None:
            raise UsageError(f"variant {name} needs k (scenario field 'k' or --k)")
        return RankingVariant(tag, k)
    return RankingVariant(tag)


def _ranking_rows(r: Ranking, scores: Sequence[float]) -> tuple[ReportRow, ...]:
    contrib = expected_utility(r).per_position_contribution
    return tuple(
        ReportRow(p, r.entities[i].id, float(scores[i]), 0.0, click_probability(r, p), contrib[p - 1])
        for p, i in enumerate(r.order, start=1)
    )


def cmd_rank(scenario: Scenario, variant: str, oracle: bool, k: float | None = None) -> tuple[Report, int]:
    s = _need(scenario, "ranking")
    var = _variant(variant, s, k)
    try:
        r = ranking.rank_by_variant(s.entities, var)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    scores = [ranking.variant_score(e, var) for e in s.entities]
    value = expected_utility(r).expected_utility
    summary = {"variant": var.tag.value, "order": r.ids, "expected_utility": value}
    status = EXIT_OK
    if oracle:
        best, best_value = ranking.brute_force_optimal(s.entities)
        gap = best_value - value
        summary.update(oracle_order=best.ids, oracle_value=best_value, gap=gap)
        if var.tag in (Variant.CE, Variant.SOCIAL_OPTIMAL) and abs(gap) > ORACLE_TOL:
            status = EXIT_FAIL
    return Report("rank", _ranking_rows(r, scores), summary), status


def _auction_key(name: str, a: mechanism.Advertiser, b: float) -> float:
    if name == "gsp":
        return a.ctr * b
    if name == "overture":
        return b
    return mechanism.pricing_weight(a) * b


def _auction_report(name: str, ads, bids) -> tuple[Report, mechanism.AuctionOutcome]:
    out = mechanism.run_auction(name, ads, bids)
    rows = tuple(
        ReportRow(p, ads[i].id, _auction_key(name, ads[i], bids[i]), price, q, price * q)
        for p, (i, price, q) in enumerate(zip(out.allocation, out.prices, out.click_probs), start=1)
    )
    summary = {
        "mechanism": name,
        "allocation": [ads[i].id for i in out.allocation],
        "prices": list(out.prices),
        "advertiser_profits": list(out.advertiser_profits),
        "se_revenue": out.se_revenue,
        "total_revenue": out.total_revenue,
    }
    return Report("auction", rows, summary), out


def cmd_auction(scenario: Scenario, mech: str) -> tuple[Report, int]:
    s = _need(scenario, "auction")
    if mech not in mechanism.MECHANISMS:
        raise UsageError(f"unknown mechanism {mech!r}; choose from {sorted(mechanism.MECHANISMS)}")
    report, out = _auction_report(mech, s.advertisers, s.bids)
    status = EXIT_OK
    if mech in ("ce", "vcg"):
        # both share the w*b allocation, so prices compare slot by slot
        ce = mechanism.run_ce_auction(s.advertisers, s.bids)
        vcg = mechanism.vcg_prices(s.advertisers, s.bids, ce.allocation)
        dominates = all(p >= q - ORACLE_TOL for p, q in zip(ce.prices, vcg))
        report.summary.update(ce_prices=list(ce.prices), vcg_prices=vcg, ce_dominates_vcg=dominates)
        status = EXIT_OK if dominates else EXIT_FAIL
    return report, status


def _ids(ads, groups) -> list[list]:
    return [[ads[i].id for i in g] for g in groups]


def cmd_equilibrium(scenario: Scenario | None, batch: int | None = None, seed: int = 0,
                    tolerance: float = equilibrium.DEFAULT_TOLERANCE) -> tuple[Report, int]:
    if batch is not None:
        return _equilibrium_batch(batch, seed, tolerance)
    s = _need(scenario, "equilibrium", "auction")
    ads = s.advertisers
    bids, _ = equilibrium.equilibrium_bids(ads)
    rep = equilibrium.vcg_equivalence_check(ads, tolerance)
    out = mechanism.run_ce_auction(ads, bids)
    rows = tuple(
        ReportRow(p, ads[i].id, ranking.ce_score(ads[i].as_entity()), price, q, price * q)
        for p, (i, price, q) in enumerate(zip(out.allocation, out.prices, out.click_probs), start=1)
    )
    dev = rep.worst_deviation
    summary = {
        "bids": {str(a.id): b for a, b in zip(ads, bids)},
        "order": [ads[i].id for i in rep.order],
        "is_envy_free": rep.is_envy_free,
        "worst_violation": rep.worst_violation,
        "worst_deviation": None if dev is None else {"advertiser": ads[dev[0]].id, "position": dev[1]},
        "se_revenue": rep.se_revenue,
        "social_revenue": rep.social_revenue,
        "vcg_truthful_revenue": rep.vcg_truthful_revenue,
        "vcg_prices": list(rep.vcg_prices),
        "max_price_gap": max(rep.price_gaps, default=0.0),
        "ties": _ids(ads, rep.ties),
    }
    return Report("equilibrium", rows, summary), EXIT_OK if rep.is_envy_free else EXIT_FAIL


def _equilibrium_batch(count: int, seed: int, tolerance: float) -> tuple[Report, int]:
    if count < 1:
        raise UsageError("--batch must be >= 1")
    spec = RandomInstanceSpec(count=count, seed=seed, kind="equilibrium", utility_range=(0.0, 10.0))
    passed = 0
    worst = worst_gap = 0.0
    for s in generate_instances(spec):
        rep = equilibrium.vcg_equivalence_check(s.advertisers, tolerance)
        passed += rep.is_envy_free
        worst = max(worst, rep.worst_violation)
        worst_gap = max([worst_gap, *rep.price_gaps])
    summary = {"instances": count, "seed": seed, "envy_free": passed, "failed": count - passed,
               "max_worst_violation": worst, "max_price_gap": worst_gap}
    return Report("equilibrium_batch", (), summary), EXIT_OK if passed == count else EXIT_FAIL


def cmd_simulate(scenario: Scenario, trials: int | None, seed: int | None,
                 variant: str = "ce", k: float | None = None) -> tuple[Report, int]:
    s = _need(scenario, "ranking")
    block = s.simulation
    trials = trials if trials is not None else (block.trials if block else DEFAULT_TRIALS)
    seed = seed if seed is not None else (block.seed if block else 0)
    if trials < 1:
        raise UsageError("--trials must be >= 1")
    if seed < 0:
        raise UsageError("--seed must be >= 0")
    var = _variant(variant, s, k)
    r = ranking.rank_by_variant(s.entities, var)
    est = simulator.estimate_expected_utility(r, trials, seed)
    exact = expected_utility(r).expected_utility
    diff = est.mean_utility - exact
    z = diff / est.std_error if est.std_error > 0 else (0.0 if diff == 0 else float("inf"))
    ok = abs(z) <= 4.0
    summary = {
        "order": r.ids,
        "analytic": exact,
        "simulated": est.mean_utility,
        "std_error": est.std_error,
        "z": z if abs(z) != float("inf") else None,
        "within_4_sigma": ok,
        "trials": trials,
        "seed": seed,
        "click_freq": list(est.per_position_click_freq),
    }
    scores = [ranking.variant_score(e, var) for e in s.entities]
    return Report("simulate", _ranking_rows(r, scores), summary), EXIT_OK if ok else EXIT_FAIL


def cmd_diversity(scenario: Scenario, solver: str) -> tuple[Report, int]:
    s = _need(scenario, "diversity")
    inst = s.diversity_instance()
    if solver == "brute":
        r, value = diversity.brute_force_diversity(inst)
    elif solver == "greedy":
        r, value = diversity.greedy_diversity(inst)
    else:
        raise UsageError(f"unknown solver {solver!r}; choose brute or greedy")
    resid = diversity.residual_utilities(inst, r)
    rows = tuple(
        ReportRow(p, r.entities[i].id, ur, 0.0, click_probability(r, p), ur * click_probability(r, p))
        for p, (i, ur) in enumerate(zip(r.order, resid), start=1)
    )
    summary = {"solver": solver, "order": r.ids, "value": value, "residual_rule": inst.residual_rule}
    status = EXIT_OK
    if s.adjacency is not None:
        mis = diversity.max_independent_set_bruteforce(s.adjacency)
        top = diversity.nonzero_residual_prefix(inst, r)
        match = diversity.is_independent(s.adjacency, top) and len(top) == len(mis)
        summary.update(
            independent_set=[inst.entities[i].id for i in mis],
            independent_set_size=len(mis),
            top_set=[inst.entities[i].id for i in top],
            correspondence="match" if match else "mismatch",
        )
        if solver == "brute" and not match:
            status = EXIT_FAIL
    return Report("diversity", rows, summary), status


def cmd_compare(scenario: Scenario, k: float | None = None) -> tuple[Report, int]:
    s = _need(scenario, "ranking", "auction")
    if s.kind == "auction":
        results = {}
        for name in sorted(mechanism.MECHANISMS):
            out = mechanism.run_auction(name, s.advertisers, s.bids)
            results[name] = {"allocation": [s.advertisers[i].id for i in out.allocation],
                             "se_revenue": out.se_revenue, "total_revenue": out.total_revenue}
        report, _ = _auction_report("ce", s.advertisers, s.bids)
        summary = {"mechanisms": results,
                   "social_revenue_bound": mechanism.social_revenue_bound(s.advertisers)}
        return Report("compare", report.rows, summary), EXIT_OK

    values, skipped = {}, {}
    for tag in Variant:
        try:
            var = _variant(tag.value, s, k)
            values[tag.value] = expected_utility(ranking.rank_by_variant(s.entities, var)).expected_utility
        except (UsageError, ValueError) as exc:
            skipped[tag.value] = str(exc)
    summary = {"variants": values, "skipped": skipped}
    if len(s.entities) <= ranking.BRUTE_FORCE_MAX_N:
        summary["oracle_value"] = ranking.brute_force_optimal(s.entities)[1]
    r = ranking.rank_by_ce(s.entities)
    return Report("compare", _ranking_rows(r, [ranking.ce_score(e) for e in s.entities]), summary), EXIT_OK


def cmd_selfcheck() -> int:
    results = checks.run_selfcheck()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cerank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, metavar="PATH")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--format", choices=("structured", "tabular"), default="structured")

    p = sub.add_parser("rank", help="rank entities with CE or a reduced variant")
    common(p)
    p.add_argument("--variant", default="ce")
    p.add_argument("--k", type=float)
    p.add_argument("--oracle", action="store_true", help="also search every ordering")

    p = sub.add_parser("auction", help="run one auction mechanism on fixed bids")
    common(p)
    p.add_argument("--mechanism", default="ce", choices=sorted(mechanism.MECHANISMS))

    p = sub.add_parser("equilibrium", help="equilibrium bids and envy-freeness check")
    common(p, scenario_required=False)
    p.add_argument("--batch", type=int, metavar="N", help="check N random instances instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=equilibrium.DEFAULT_TOLERANCE)

    p = sub.add_parser("simulate", help="Monte-Carlo estimate against the closed form")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", default="ce")
    p.add_argument("--k", type=float)

    p = sub.add_parser("diversity", help="diversity ranking (exact or greedy)")
    common(p)
    p.add_argument("--solver", default="brute", choices=("brute", "greedy"))

    p = sub.add_parser("compare", help="every variant or mechanism side by side")
    common(p)
    p.add_argument("--k", type=float)

    sub.add_parser("selfcheck", help="run the property suite at reduced size")
    return parser


def _dispatch(args) -> tuple[Report, int]:
    scenario = load_scenario(args.scenario) if getattr(args, "scenario", None) else None
    if args.command == "rank":
        return cmd_rank(scenario, args.variant, args.oracle, args.k)
    if args.command == "auction":
        return cmd_auction(scenario, args.mechanism)
    if args.command == "equilibrium":
        return cmd_equilibrium(scenario, args.batch, args.seed, args.tolerance)
    if args.command == "simulate":
        return cmd_simulate(scenario, args.trials, args.seed, args.variant, args.k)
    if args.command == "diversity":
        return cmd_diversity(scenario, args.solver)
    return cmd_compare(scenario, args.k)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "selfcheck":
        return cmd_selfcheck()
    try:
        report, status = _dispatch(args)
    except (UsageError, ScenarioError, SizeGuardError) as exc:
        print(f"cerank {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        try:
            write_report(report, args.out, args.format)
        except OSError as exc:
            print(f"cerank {args.command}: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(render_report(report, args.format))
    return status


if __name__ == "__main__":
    sys.exit(main())

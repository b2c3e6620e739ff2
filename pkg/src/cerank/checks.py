"""Executable versions of the model's optimality, pricing and hardness claims.

Each check draws seeded random instances, compares the fast path against an
exhaustive or closed-form oracle, and returns a :class:`CheckResult`. The
``selfcheck`` command runs them at reduced counts; the acceptance tests run
them at full size.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from cerank import diversity, equilibrium, mechanism, ranking, simulator
from cerank.model import Ranking, expected_utility
from cerank.scenario_io import (
    RandomInstanceSpec,
    Report,
    ReportRow,
    generate_instances,
    load_report,
    load_scenario,
    save_scenario,
    write_report,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    worst: float = 0.0
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(name: str, fn: Callable[[], tuple[bool, str, float]]) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail, worst = fn()
    return CheckResult(name, passed, detail, worst, time.perf_counter() - t0)


def _ranking_instances(count: int, seed: int, **kw):
    return [s.entities for s in generate_instances(RandomInstanceSpec(count=count, seed=seed, **kw))]


def _auction_instances(count: int, seed: int, kind: str = "auction", **kw):
    kw.setdefault("utility_range", (0.0, 10.0))
    return generate_instances(RandomInstanceSpec(count=count, seed=seed, kind=kind, **kw))


def check_ce_optimality(count: int = 10_000, seed: int = 1, n_range=(2, 8),
                        tol: float = 1e-12) -> CheckResult:
    def run():
        worst = 0.0
        for ents in _ranking_instances(count, seed, n_range=n_range):
            ce = expected_utility(ranking.rank_by_ce(ents)).expected_utility
            _, best = ranking.brute_force_optimal(ents)
            worst = max(worst, abs(best - ce))
        return worst <= tol, f"{count} instances, max |E(CE) - E(best)| = {worst:.3g} (tol {tol:g})", worst
    return _timed("CE ranking is optimal", run)


def check_adjacent_swaps(count: int = 10_000, seed: int = 1, n_range=(2, 8),
                         tol: float = 1e-12) -> CheckResult:
    def run():
        worst = -np.inf
        for ents in _ranking_instances(count, seed, n_range=n_range):
            r = ranking.rank_by_ce(ents)
            base = expected_utility(r).expected_utility
            order = list(r.order)
            for p in range(len(order) - 1):
                swapped = order[:]
                swapped[p], swapped[p + 1] = swapped[p + 1], swapped[p]
                gain = expected_utility(Ranking(r.entities, swapped)).expected_utility - base
                worst = max(worst, gain)
        return worst <= tol, f"{count} instances, max gain from one adjacent swap = {worst:.3g}", worst
    return _timed("adjacent swaps never help", run)


def check_taxonomy(count: int = 1000, seed: int = 2, k: float = 0.9) -> CheckResult:
    def run():
        bad = 0
        v = ranking.Variant
        for ents in _ranking_instances(count, seed, abandon_mode="zero"):
            ce_order = ranking.rank_by_ce(ents).order
            ce = [ranking.ce_score(e) for e in ents]
            for tag in (v.PRP, v.BID_ORDER):
                var = ranking.RankingVariant(tag)
                other = ranking.rank_by_variant(ents, var).order
                scores = [ranking.variant_score(e, var) for e in ents]
                bad += not ranking.orders_equivalent(ce_order, other, ce, scores)
        for ents in _ranking_instances(count, seed + 1, abandon_mode="k_minus_c", k=k):
            ce_order = ranking.rank_by_ce(ents).order
            ce = [ranking.ce_score(e) for e in ents]
            for tag in (v.EXPECTED_PROFIT, v.PERCEIVED_TIMES_ACTUAL):
                var = ranking.RankingVariant(tag)
                other = ranking.rank_by_variant(ents, var).order
                scores = [ranking.variant_score(e, var) for e in ents]
                bad += not ranking.orders_equivalent(ce_order, other, ce, scores)
        return bad == 0, f"{count} zero-abandonment + {count} gamma=k-C instances, {bad} order mismatches", bad
    return _timed("taxonomy reductions", run)


def check_order_preservation(count: int = 1000, seed: int = 3) -> CheckResult:
    def run():
        bad = 0
        for s in _auction_instances(count, seed):
            ads, bids = s.advertisers, s.bids
            out = mechanism.run_ce_auction(ads, bids)
            wb = [mechanism.pricing_weight(a) * b for a, b in zip(ads, bids)]
            ce = mechanism.ce_rank_values(ads, out)
            ce_order = sorted(range(len(ads)), key=lambda i: -ce[i])
            bad += not ranking.orders_equivalent(out.allocation, ce_order, wb, ce)
        return bad == 0, f"{count} auctions, {bad} where w*b order differs from p*c/mu order", bad
    return _timed("pricing preserves the ranking order", run)


def check_individual_rationality(count: int = 1000, seed: int = 4) -> CheckResult:
    def run():
        violations = 0
        for s in _auction_instances(count, seed):
            for name in mechanism.MECHANISMS:
                out = mechanism.run_auction(name, s.advertisers, s.bids)
                violations += sum(p > b for p, b in zip(out.prices, out.bids))
        return violations == 0, f"{count} auctions x {len(mechanism.MECHANISMS)} mechanisms, {violations} prices above bid", violations
    return _timed("price never exceeds bid", run)


def check_mechanism_reductions(count: int = 1000, seed: int = 5, k: float = 0.9,
                               tol: float = 1e-12) -> CheckResult:
    def run():
        overture_bad = 0
        for s in _auction_instances(count, seed, abandon_mode="zero"):
            ce = mechanism.run_ce_auction(s.advertisers, s.bids)
            ov = mechanism.run_overture_auction(s.advertisers, s.bids)
            overture_bad += ce.allocation != ov.allocation or ce.prices != ov.prices
        worst = 0.0
        gsp_bad = 0
        for s in _auction_instances(count, seed + 1, abandon_mode="k_minus_c", k=k):
            ce = mechanism.run_ce_auction(s.advertisers, s.bids)
            gsp = mechanism.run_gsp_auction(s.advertisers, s.bids)
            gsp_bad += ce.allocation != gsp.allocation
            worst = max([worst, *(abs(p - q) for p, q in zip(ce.prices, gsp.prices))])
        ok = overture_bad == 0 and gsp_bad == 0 and worst <= tol
        return ok, (f"overture: {overture_bad} mismatches; gsp: {gsp_bad} allocation mismatches, "
                    f"max price gap {worst:.3g}"), worst
    return _timed("CE mechanism reduces to Overture and GSP", run)


def check_nash_equilibrium(count: int = 1000, seed: int = 6, n_range=(2, 8),
                           tol: float = 1e-9, social_tol: float = 1e-12) -> CheckResult:
    def run():
        worst = 0.0
        worst_social = 0.0
        for s in _auction_instances(count, seed, kind="equilibrium", n_range=n_range):
            bids, _ = equilibrium.equilibrium_bids(s.advertisers)
            rep = equilibrium.verify_equilibrium(s.advertisers, bids, tol)
            worst = max(worst, rep.worst_violation)
            total = mechanism.run_ce_auction(s.advertisers, bids).total_revenue
            worst_social = max(worst_social, abs(total - rep.social_revenue))
        ok = worst <= tol and worst_social <= social_tol
        return ok, (f"{count} instances, worst deviation gain {worst:.3g} (tol {tol:g}), "
                    f"max |total - social optimum| {worst_social:.3g}"), worst
    return _timed("equilibrium bids are envy-free and socially optimal", run)


def check_vcg_dominance(count: int = 1000, seed: int = 7, tol: float = 1e-12) -> CheckResult:
    def run():
        worst = 0.0
        for s in _auction_instances(count, seed):
            out = mechanism.run_ce_auction(s.advertisers, s.bids)
            vcg = mechanism.vcg_prices(s.advertisers, s.bids, out.allocation)
            worst = max([worst, *(q - p for p, q in zip(out.prices, vcg))])
        return worst <= tol, f"{count} auctions, max (p_vcg - p_ce) = {worst:.3g}", worst
    return _timed("CE prices dominate VCG prices", run)


def check_revenue_equivalence(count: int = 1000, seed: int = 8, tol: float = 1e-9) -> CheckResult:
    def run():
        worst = 0.0
        for s in _auction_instances(count, seed, kind="equilibrium"):
            rep = equilibrium.vcg_equivalence_check(s.advertisers)
            worst = max([worst, *rep.price_gaps])
        ads = worked_pair()
        rep = equilibrium.vcg_equivalence_check(ads)
        worked = rep.ce_prices[0] == rep.vcg_prices[0]
        ok = worst <= tol and worked
        return ok, (f"{count} instances, max |p_ce(eq) - p_vcg(truthful)| = {worst:.3g}; "
                    f"worked pair {rep.ce_prices[0]!r} vs {rep.vcg_prices[0]!r}"), worst
    return _timed("equilibrium revenue equals truthful VCG", run)


def worked_pair() -> list[mechanism.Advertiser]:
    return [mechanism.Advertiser("a1", 10.0, 0.5, 0.5), mechanism.Advertiser("a2", 4.0, 0.3, 0.3)]


def check_monte_carlo(count: int = 100, trials: int = 100_000, seed: int = 9,
                      sigmas: float = 4.0) -> CheckResult:
    def run():
        worst = 0.0
        rng = np.random.default_rng(seed)
        for t, ents in enumerate(_ranking_instances(count, seed)):
            r = Ranking(tuple(ents), tuple(int(i) for i in rng.permutation(len(ents))))
            est = simulator.estimate_expected_utility(r, trials, master_seed=seed * 100_003 + t)
            exact = expected_utility(r).expected_utility
            z = abs(est.mean_utility - exact) / est.std_error if est.std_error > 0 else (
                0.0 if est.mean_utility == exact else np.inf)
            worst = max(worst, z)
        replay = [simulator.estimate_expected_utility(r, 2_000, master_seed=seed) for _ in range(2)]
        ok = worst <= sigmas and replay[0] == replay[1]
        return ok, f"{count} rankings x {trials} trials, worst |z| = {worst:.2f}; replay identical: {replay[0] == replay[1]}", worst
    return _timed("simulation matches the closed form", run)


def named_graphs() -> dict[str, np.ndarray]:
    k3 = np.ones((3, 3), dtype=int) - np.eye(3, dtype=int)
    p3 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    c5 = np.zeros((5, 5), dtype=int)
    for i in range(5):
        c5[i, (i + 1) % 5] = c5[(i + 1) % 5, i] = 1
    return {"K3": k3, "P3": p3, "C5": c5, "edgeless4": np.zeros((4, 4), dtype=int)}


def random_graphs(count: int, seed: int, n_range=(2, 8), p: float = 0.4) -> list[np.ndarray]:
    specs = generate_instances(RandomInstanceSpec(count=count, seed=seed, kind="diversity",
                                                  n_range=n_range, edge_prob=p))
    return [np.array(s.adjacency) for s in specs]


def check_diversity_reduction(count: int = 50, seed: int = 10, tol: float = 1e-12) -> CheckResult:
    def run():
        graphs = list(named_graphs().values()) + random_graphs(count, seed)
        mismatches = 0
        greedy_excess = 0.0
        for adj in graphs:
            corr = diversity.independent_set_correspondence(adj)
            mismatches += not corr.matches
            inst = diversity.instance_from_graph(adj)
            _, g = diversity.greedy_diversity(inst)
            best = diversity.residual_expected_utility(inst, corr.ranking)
            greedy_excess = max(greedy_excess, g - best)
        ok = mismatches == 0 and greedy_excess <= tol
        return ok, (f"{len(graphs)} graphs, {mismatches} independent-set mismatches, "
                    f"max greedy - optimum {greedy_excess:.3g}"), mismatches
    return _timed("diversity optimum solves maximum independent set", run)


def check_round_trip(count: int = 50, seed: int = 11) -> CheckResult:
    def run():
        bad = 0
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "x.json"
            for kind in ("ranking", "auction", "equilibrium", "diversity"):
                for s in generate_instances(RandomInstanceSpec(count=count, seed=seed, kind=kind)):
                    save_scenario(s, path)
                    bad += load_scenario(path) != s
            rng = np.random.default_rng(seed)
            for _ in range(count):
                vals = rng.standard_normal(5) * 10.0 ** rng.integers(-300, 300, size=5)
                rep = Report("ranking", (ReportRow(1, "x", *map(float, vals[:4])),),
                             {"value": float(vals[4]), "flag": True, "ids": ["a", "b"]})
                write_report(rep, path)
                bad += load_report(path) != rep
        return bad == 0, f"{4 * count + count} documents, {bad} round-trip differences", bad
    return _timed("scenario and report files round-trip", run)



def run_selfcheck() -> list[CheckResult]:
    """The whole suite at desk-check sizes (a few seconds)."""
    return [
        check_ce_optimality(count=300),
        check_adjacent_swaps(count=300),
        check_taxonomy(count=100),
        check_order_preservation(count=100),
        check_individual_rationality(count=100),
        check_mechanism_reductions(count=100),
        check_nash_equilibrium(count=100),
        check_vcg_dominance(count=100),
        check_revenue_equivalence(count=100),
        check_monte_carlo(count=10, trials=20_000),
        check_diversity_reduction(count=10),
        check_round_trip(count=10),
    ]

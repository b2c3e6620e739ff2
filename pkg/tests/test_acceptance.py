"""Every acceptance criterion at its stated size and tolerance.

Each test logs a PASS/FAIL line; the lines are printed together at the end
of the run. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import json
import subprocess
import sys

import pytest

from cerank import checks

# (label, check, arguments): instance counts and tolerances are the required ones
CRITERIA = [
    ("01 ce_optimality", checks.check_ce_optimality,
     dict(count=10_000, n_range=(2, 8), tol=1e-12)),
    ("02 adjacent_swaps", checks.check_adjacent_swaps,
     dict(count=10_000, n_range=(2, 8), tol=1e-12)),
    ("03 taxonomy_reductions", checks.check_taxonomy, dict(count=1000)),
    ("04 order_preservation", checks.check_order_preservation, dict(count=1000)),
    ("05 individual_rationality", checks.check_individual_rationality, dict(count=1000)),
    ("06 mechanism_reductions", checks.check_mechanism_reductions, dict(count=1000, tol=1e-12)),
    ("07 nash_equilibrium", checks.check_nash_equilibrium,
     dict(count=1000, n_range=(2, 8), tol=1e-9, social_tol=1e-12)),
    ("08 vcg_dominance", checks.check_vcg_dominance, dict(count=1000, tol=1e-12)),
    ("09 revenue_equivalence", checks.check_revenue_equivalence, dict(count=1000, tol=1e-9)),
    ("10 monte_carlo", checks.check_monte_carlo, dict(count=100, trials=100_000, sigmas=4.0)),
    ("11 diversity_reduction", checks.check_diversity_reduction, dict(count=50, tol=1e-12)),
    ("12 round_trip", checks.check_round_trip, dict(count=50)),
]

RUNTIME_LIMIT_CE = 60.0


@pytest.mark.parametrize("label,check,kwargs", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(label, check, kwargs, acceptance_log):
    result = check(**kwargs)
    passed = result.passed
    detail = result.detail
    if label.startswith("01"):
        passed = passed and result.seconds < RUNTIME_LIMIT_CE
        detail += f"; {result.seconds:.1f}s (limit {RUNTIME_LIMIT_CE:.0f}s)"
    acceptance_log(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
    assert passed, detail


def test_worked_pair_prices_are_exactly_equal(acceptance_log):
    from cerank.equilibrium import vcg_equivalence_check

    rep = vcg_equivalence_check(checks.worked_pair())
    ok = rep.ce_prices[0] == 2.4 and rep.vcg_prices[0] == 2.4
    acceptance_log(f"{'PASS' if ok else 'FAIL'}  09 worked_pair: p_ce={rep.ce_prices[0]!r} p_vcg={rep.vcg_prices[0]!r}")
    assert ok


def test_cli_output_is_byte_identical(tmp_path, acceptance_log):
    scenario = tmp_path / "s.json"
    scenario.write_text(json.dumps({
        "format_version": 1, "kind": "auction",
        "advertisers": [{"id": "a1", "value": 10.0, "ctr": 0.5, "abandon_prob": 0.5},
                        {"id": "a2", "value": 4.0, "ctr": 0.3, "abandon_prob": 0.3},
                        {"id": "a3", "value": 7.0, "ctr": 0.2, "abandon_prob": 0.1}],
        "bids": [9.0, 3.0, 5.0]}))
    commands = [
        ["auction", "--scenario", str(scenario), "--mechanism", "vcg"],
        ["compare", "--scenario", str(scenario), "--format", "tabular"],
        ["equilibrium", "--scenario", str(scenario)],
        ["equilibrium", "--batch", "20", "--seed", "5"],
    ]
    differing = []
    for argv in commands:
        runs = [subprocess.run([sys.executable, "-m", "cerank", *argv], capture_output=True)
                for _ in range(2)]
        if runs[0].stdout != runs[1].stdout or not runs[0].stdout or runs[0].returncode != 0:
            differing.append(argv[0])
    ok = not differing
    acceptance_log(f"{'PASS' if ok else 'FAIL'}  12 cli_determinism: {len(commands)} commands run twice, "
                   f"{len(differing)} differing")
    assert ok, differing

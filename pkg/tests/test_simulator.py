import numpy as np
import pytest

from cerank.model import Entity, Ranking, expected_utility
from cerank.simulator import estimate_expected_utility, simulate_trial


def _rng():
    return np.random.default_rng(0)


def test_certain_click():
    t = simulate_trial(Ranking.identity([Entity("x", 1, 1.0, 0.0), Entity("y", 1, 0.5)]), _rng())
    assert t.terminal == ("clicked", 1)


def test_certain_abandonment():
    t = simulate_trial(Ranking.identity([Entity("x", 1, 0.0, 1.0), Entity("y", 1, 0.5)]), _rng())
    assert t.terminal == ("abandoned", 1)


def test_certain_continuation():
    r = Ranking.identity([Entity(i, 1, 0.0, 0.0) for i in range(3)])
    t = simulate_trial(r, _rng())
    assert t.terminal == ("exhausted", None)
    assert [e for e in t.events if e[1] == "viewed"] == [(1, "viewed"), (2, "viewed"), (3, "viewed")]


def test_single_entity_estimate():
    r = Ranking.identity([Entity("s", 1.0, 0.5, 0.1)])
    est = estimate_expected_utility(r, 1_000_000, 123)
    assert abs(est.mean_utility - 0.5) <= 3 * est.std_error


def test_two_entity_estimate(pair):
    r = Ranking.identity(pair)
    est = estimate_expected_utility(r, 200_000, 5)
    assert abs(est.mean_utility - 0.7) <= 3 * est.std_error


def test_zero_utility_is_exactly_zero():
    r = Ranking.identity([Entity(i, 0.0, 0.4, 0.2) for i in range(4)])
    est = estimate_expected_utility(r, 10_000, 1)
    assert est.mean_utility == 0.0
    assert est.std_error == 0.0


def test_zero_trials_rejected(pair):
    with pytest.raises(ValueError):
        estimate_expected_utility(Ranking.identity(pair), 0, 1)


def test_replay_is_identical(pair):
    r = Ranking.identity(pair)
    a = estimate_expected_utility(r, 30_000, 99)
    b = estimate_expected_utility(r, 30_000, 99)
    assert a == b
    assert estimate_expected_utility(r, 30_000, 100) != a


def test_click_frequencies_track_click_probabilities(pair):
    r = Ranking.identity(pair)
    est = estimate_expected_utility(r, 200_000, 3)
    assert est.per_position_click_freq == pytest.approx(r.view_probs * np.array([0.4, 0.3]), abs=0.01)
    assert expected_utility(r).expected_utility == pytest.approx(0.7)

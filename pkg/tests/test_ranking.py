import itertools

import pytest
from hypothesis import given, settings

from cerank.model import Entity, Ranking, expected_utility
from cerank.ranking import (
    BRUTE_FORCE_MAX_N,
    RankingVariant,
    SizeGuardError,
    Variant,
    brute_force_optimal,
    ce_score,
    orders_equivalent,
    rank_by_ce,
    rank_by_variant,
    variant_score,
    with_abandonment_k,
)
from conftest import entities


def _naive_best(ents):
    """Plain-Python exhaustive search, kept separate from the vectorised oracle."""
    best = None
    for order in itertools.permutations(range(len(ents))):
        survive, value = 1.0, 0.0
        for i in order:
            value += survive * ents[i].click_prob * ents[i].utility
            survive *= 1.0 - ents[i].click_prob - ents[i].abandon_prob
        if best is None or value > best[1] + 1e-15:
            best = (order, value)
    return best


@pytest.mark.parametrize("u,c,g,expected", [(1.0, 0.4, 0.1, 0.8), (5.0, 0.3, 0.0, 5.0), (7.0, 0.0, 0.2, 0.0)])
def test_ce_score_examples(u, c, g, expected):
    assert ce_score(Entity("x", u, c, g)) == pytest.approx(expected, abs=1e-15)


def test_zero_absorption_scores_zero():
    assert ce_score(Entity("x", 3.0, 0.0, 0.0)) == 0.0


def test_ce_puts_higher_efficiency_first(pair):
    r = rank_by_ce(pair)
    assert r.ids == ["B", "A"]
    assert expected_utility(r).expected_utility == pytest.approx(0.8, abs=1e-15)


def test_identical_entities_keep_input_order():
    ents = [Entity(i, 1.0, 0.3, 0.1) for i in range(4)]
    assert rank_by_ce(ents).order == (0, 1, 2, 3)


def test_zero_abandonment_orders_by_utility():
    ents = [Entity("a", 0.2, 0.9), Entity("b", 0.9, 0.1), Entity("c", 0.5, 0.5)]
    assert rank_by_ce(ents).ids == ["b", "c", "a"]


def test_empty_list_rejected():
    with pytest.raises(ValueError):
        rank_by_ce([])


def test_brute_force_examples(pair):
    r, v = brute_force_optimal([Entity("x", 1, 0.5)])
    assert r.order == (0,) and v == 0.5
    r, v = brute_force_optimal(pair)
    assert r.ids == ["B", "A"]
    assert v == pytest.approx(0.8, abs=1e-15)


def test_brute_force_size_guard():
    ents = [Entity(i, 1, 0.1) for i in range(BRUTE_FORCE_MAX_N + 1)]
    with pytest.raises(SizeGuardError):
        brute_force_optimal(ents)


def test_brute_force_prefers_lexicographically_smallest_tie():
    ents = [Entity(i, 1.0, 0.2, 0.1) for i in range(3)]
    r, _ = brute_force_optimal(ents)
    assert r.order == (0, 1, 2)


@settings(max_examples=60)
@given(entities(max_size=6))
def test_vectorised_oracle_matches_naive_search(ents):
    _, v = brute_force_optimal(ents)
    assert v == pytest.approx(_naive_best(ents)[1], rel=1e-12, abs=1e-15)


@settings(max_examples=200)
@given(entities(max_size=7))
def test_ce_order_is_optimal(ents):
    _, best = brute_force_optimal(ents)
    assert abs(expected_utility(rank_by_ce(ents)).expected_utility - best) <= 1e-12


@given(entities(min_size=2, max_size=7))
def test_no_adjacent_swap_improves_ce(ents):
    r = rank_by_ce(ents)
    base = expected_utility(r).expected_utility
    for p in range(len(ents) - 1):
        order = list(r.order)
        order[p], order[p + 1] = order[p + 1], order[p]
        assert expected_utility(Ranking(r.entities, tuple(order))).expected_utility <= base + 1e-12


def test_prp_puts_more_relevant_first():
    ents = [Entity("low", 0.2, 0.5), Entity("high", 0.9, 0.5)]
    assert rank_by_variant(ents, "prp").ids == ["high", "low"]


def test_abandonment_aware_differs_from_prp():
    ents = [Entity("a", 0.9, 0.3, 0.6), Entity("b", 0.8, 0.3, 0.1)]
    v = RankingVariant(Variant.ABANDONMENT_AWARE)
    assert variant_score(ents[0], v) == pytest.approx(0.54)
    assert variant_score(ents[1], v) == pytest.approx(0.64 / 0.9)
    assert rank_by_variant(ents, v).ids == ["b", "a"]
    assert rank_by_variant(ents, "prp").ids == ["a", "b"]


def test_k_required_only_where_used():
    with pytest.raises(ValueError):
        RankingVariant(Variant.RELEVANCE_SQUARED_OVER_K)
    with pytest.raises(ValueError):
        RankingVariant(Variant.RELEVANCE_SQUARED_OVER_K, 1.5)
    with pytest.raises(ValueError):
        RankingVariant(Variant.PRP, 0.5)
    assert RankingVariant(Variant.RELEVANCE_SQUARED_OVER_K, 0.5).needs_k


def test_relevance_variants_refuse_utilities_above_one():
    with pytest.raises(ValueError):
        rank_by_variant([Entity("x", 2.0, 0.5)], "prp")
    assert rank_by_variant([Entity("x", 2.0, 0.5)], "bid_order").order == (0,)


@given(entities(max_size=7, max_utility=1.0))
def test_zero_abandonment_reductions(ents):
    # the reduction needs clickable entities: CE scores an unclickable one 0, PRP does not
    ents = [Entity(e.id, e.utility, max(e.click_prob, 0.01), 0.0) for e in ents]
    ce = rank_by_ce(ents)
    ce_scores = [ce_score(e) for e in ents]
    for tag in (Variant.PRP, Variant.BID_ORDER):
        var = RankingVariant(tag)
        other = rank_by_variant(ents, var)
        scores = [variant_score(e, var) for e in ents]
        assert orders_equivalent(ce.order, other.order, ce_scores, scores)


@given(entities(max_size=7, max_utility=1.0))
def test_constant_absorption_reductions(ents):
    k = 1.0
    ents = with_abandonment_k(ents, k)
    ce = rank_by_ce(ents)
    ce_scores = [ce_score(e) for e in ents]
    for tag in (Variant.PERCEIVED_TIMES_ACTUAL, Variant.EXPECTED_PROFIT):
        var = RankingVariant(tag)
        scores = [variant_score(e, var) for e in ents]
        assert orders_equivalent(ce.order, rank_by_variant(ents, var).order, ce_scores, scores)


def test_relevance_squared_matches_ce_when_clicks_equal_relevance():
    k = 0.9
    ents = [Entity(i, u, u, k - u) for i, u in enumerate([0.1, 0.7, 0.4, 0.85])]
    var = RankingVariant(Variant.RELEVANCE_SQUARED_OVER_K, k)
    assert rank_by_variant(ents, var).order == rank_by_ce(ents).order


def test_social_optimal_is_ce():
    ents = [Entity("a", 3.0, 0.2, 0.5), Entity("b", 1.0, 0.6, 0.1)]
    assert rank_by_variant(ents, "social_optimal").order == rank_by_ce(ents).order

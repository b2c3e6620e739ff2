"""Click-efficiency ranking, its reduced variants, and an exhaustive oracle."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from cerank.model import Entity, Ranking

#: Largest list the permutation oracle will enumerate (10! orders).
BRUTE_FORCE_MAX_N = 10

# Relative slack under which two objective values count as tied.
TIE_RTOL = 1e-12


class SizeGuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


def ce_score(e: Entity) -> float:
    """Utility generated per unit of view probability the entity consumes."""
    if e.click_prob == 0.0:
        return 0.0
    return e.utility * e.click_prob / (e.click_prob + e.abandon_prob)


def _sorted_order(scores: Sequence[float]) -> tuple[int, ...]:
    # sorted() is stable, so equal scores keep input order
    return tuple(sorted(range(len(scores)), key=lambda i: -scores[i]))


def rank_by_scores(entities: Sequence[Entity], scores: Sequence[float]) -> Ranking:
    if len(scores) != len(entities):
        raise ValueError("one score per entity required")
    return Ranking(tuple(entities), _sorted_order(scores))


def rank_by_ce(entities: Sequence[Entity]) -> Ranking:
    if not entities:
        raise ValueError("cannot rank an empty list")
    return rank_by_scores(entities, [ce_score(e) for e in entities])


class Variant(str, enum.Enum):
    CE = "ce"
    PRP = "prp"
    RELEVANCE_SQUARED_OVER_K = "relevance_squared_over_k"
    PERCEIVED_TIMES_ACTUAL = "perceived_times_actual"
    ABANDONMENT_AWARE = "abandonment_aware"
    BID_ORDER = "bid_order"
    EXPECTED_PROFIT = "expected_profit"
    SOCIAL_OPTIMAL = "social_optimal"


_NEEDS_K = {Variant.RELEVANCE_SQUARED_OVER_K}
# Variants whose utility is a relevance probability.
_RELEVANCE_UTILITY = {
    Variant.PRP,
    Variant.RELEVANCE_SQUARED_OVER_K,
    Variant.PERCEIVED_TIMES_ACTUAL,
    Variant.ABANDONMENT_AWARE,
}


@dataclass(frozen=True)
class RankingVariant:
    """A reduced ranking function.

    ``k`` is the constant of the ``gamma = k - C`` abandonment assumption and
    is only meaningful for ``RELEVANCE_SQUARED_OVER_K``.
    """

    tag: Variant
    k: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tag", Variant(self.tag))
        if self.tag in _NEEDS_K:
            if self.k is None:
                raise ValueError(f"variant {self.tag.value} requires k")
            if not (0.0 < self.k <= 1.0):
                raise ValueError(f"k must lie in (0, 1], got {self.k!r}")
        elif self.k is not None:
            raise ValueError(f"variant {self.tag.value} does not take k")

    @property
    def needs_k(self) -> bool:
        return self.tag in _NEEDS_K


def _abandonment_score(e: Entity) -> float:
    # perceived relevance approximated by actual relevance: C ~ U
    denom = e.utility + e.abandon_prob
    return e.utility * e.utility / denom if denom > 0 else 0.0


_SCORERS: dict[Variant, Callable[[Entity, float | None], float]] = {
    Variant.CE: lambda e, k: ce_score(e),
    Variant.PRP: lambda e, k: e.utility,
    Variant.RELEVANCE_SQUARED_OVER_K: lambda e, k: e.utility * e.utility / k,
    Variant.PERCEIVED_TIMES_ACTUAL: lambda e, k: e.click_prob * e.utility,
    Variant.ABANDONMENT_AWARE: lambda e, k: _abandonment_score(e),
    Variant.BID_ORDER: lambda e, k: e.utility,
    Variant.EXPECTED_PROFIT: lambda e, k: e.click_prob * e.utility,
    Variant.SOCIAL_OPTIMAL: lambda e, k: ce_score(e),
}


def variant_score(e: Entity, variant: RankingVariant) -> float:
    return _SCORERS[variant.tag](e, variant.k)


def rank_by_variant(entities: Sequence[Entity], variant: RankingVariant | Variant | str) -> Ranking:
    if not isinstance(variant, RankingVariant):
        variant = RankingVariant(Variant(variant))
    if not entities:
        raise ValueError("cannot rank an empty list")
    if variant.tag in _RELEVANCE_UTILITY:
        for e in entities:
            if e.utility > 1.0:
                raise ValueError(
                    f"variant {variant.tag.value} reads utility as relevance; "
                    f"entity {e.id!r} has utility {e.utility!r} > 1"
                )
    return rank_by_scores(entities, [variant_score(e, variant) for e in entities])


def with_abandonment_k(entities: Sequence[Entity], k: float) -> list[Entity]:
    """Copies of ``entities`` with abandonment set to ``k - C``."""
    if not (0.0 < k <= 1.0):
        raise ValueError(f"k must lie in (0, 1], got {k!r}")
    top = max((e.click_prob for e in entities), default=0.0)
    if k < top:
        raise ValueError(f"k={k!r} is below the largest click_prob {top!r}")
    return [Entity(e.id, e.utility, e.click_prob, k - e.click_prob) for e in entities]


def is_sorted_by(order: Sequence[int], scores: Sequence[float], rtol: float = TIE_RTOL) -> bool:
    """True if ``order`` lists ``scores`` in non-increasing order, up to ``rtol`` ties."""
    vals = [scores[i] for i in order]
    scale = max((abs(v) for v in vals), default=0.0)
    slack = rtol * max(scale, 1.0)
    return all(a >= b - slack for a, b in zip(vals, vals[1:]))


def orders_equivalent(
    order_a: Sequence[int],
    order_b: Sequence[int],
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    rtol: float = TIE_RTOL,
) -> bool:
    """Two orders agree modulo ties: each is a valid descending sort of the other's scores."""
    return is_sorted_by(order_a, scores_b, rtol) and is_sorted_by(order_b, scores_a, rtol)


# -- exhaustive oracle -------------------------------------------------------

_CHUNK = 1 << 17
# Orderings closer than this (relative) differ only by rounding in the
# vectorised sums; anything larger is a real difference and must win.
ORACLE_TIE_RTOL = 1e-14


@lru_cache(maxsize=None)
def _permutation_table(n: int) -> np.ndarray:
    table = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    table.setflags(write=False)
    return table.reshape(-1, n)


def permutation_chunks(n: int) -> Iterator[np.ndarray]:
    """All permutations of ``range(n)`` in lexicographic order, as row blocks."""
    if n <= 8:
        yield _permutation_table(n)
        return
    perms = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(perms, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def cascade_values(
    utility: np.ndarray, click: np.ndarray, abandon: np.ndarray, perms: np.ndarray
) -> np.ndarray:
    """Expected utility of every row of ``perms`` (vectorised)."""
    u = utility[perms]
    c = click[perms]
    cont = 1.0 - (c + abandon[perms])
    view = np.ones_like(c)
    if perms.shape[1] > 1:
        view[:, 1:] = np.cumprod(cont[:, :-1], axis=1)
    return (u * c * view).sum(axis=1)


def argmax_lexicographic(
    chunks: Iterator[np.ndarray], value_fn: Callable[[np.ndarray], np.ndarray]
) -> tuple[tuple[int, ...], float]:
    """Best row over lexicographically ordered chunks; earliest row wins near-ties."""
    best_val = -np.inf
    best_row: tuple[int, ...] | None = None
    for perms in chunks:
        vals = value_fn(perms)
        top = float(vals.max())
        slack = ORACLE_TIE_RTOL * max(abs(top), abs(best_val) if np.isfinite(best_val) else 0.0)
        if best_row is not None and top <= best_val + slack:
            continue
        candidates = np.flatnonzero(vals >= top - slack)
        idx = int(candidates[0])
        best_row = tuple(int(i) for i in perms[idx])
        best_val = float(vals[idx])
    assert best_row is not None
    return best_row, best_val


def brute_force_optimal(
    entities: Sequence[Entity], max_n: int = BRUTE_FORCE_MAX_N
) -> tuple[Ranking, float]:
    """Search every ordering for the maximum expected utility.

    Among orderings whose values tie (to a relative 1e-12), the
    lexicographically smallest permutation is returned.
    """
    n = len(entities)
    if n == 0:
        raise ValueError("cannot rank an empty list")
    if n > max_n:
        raise SizeGuardError(f"brute force limited to {max_n} entities, got {n}")
    u = np.array([e.utility for e in entities])
    c = np.array([e.click_prob for e in entities])
    g = np.array([e.abandon_prob for e in entities])
    order, value = argmax_lexicographic(
        permutation_chunks(n), lambda perms: cascade_values(u, c, g, perms)
    )
    return Ranking(tuple(entities), order), value

"""Ranking with redundancy: an entity's utility shrinks when a similar one sits above it.

Two residual rules are supported:

``zero_if_duplicate_above``
    utility drops to zero if any entity above has similarity exactly 1.
``linear_discount``
    utility is multiplied by ``1 - sim`` for every entity above. This is an
    extension for graded similarity; the hardness construction only uses the
    binary rule.

Similarity never changes click or abandonment probabilities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cerank.model import Entity, Ranking, click_probability
from cerank.ranking import (
    BRUTE_FORCE_MAX_N,
    SizeGuardError,
    argmax_lexicographic,
    ce_score,
    permutation_chunks,
)

ZERO_IF_DUPLICATE_ABOVE = "zero_if_duplicate_above"
LINEAR_DISCOUNT = "linear_discount"
RESIDUAL_RULES = (ZERO_IF_DUPLICATE_ABOVE, LINEAR_DISCOUNT)

MIS_MAX_N = 20
DEFAULT_GRAPH_PARAMS = (1.0, 0.5, 0.2)


@dataclass(frozen=True)
class DiversityInstance:
    entities: tuple[Entity, ...]
    similarity: np.ndarray = field(repr=False)
    residual_rule: str = ZERO_IF_DUPLICATE_ABOVE
    binary: bool = True

    def __post_init__(self) -> None:
        entities = tuple(self.entities)
        sim = np.array(self.similarity, dtype=float)
        n = len(entities)
        if sim.shape != (n, n):
            raise ValueError(f"similarity must be {n}x{n}, got shape {sim.shape}")
        if not np.array_equal(sim, sim.T):
            raise ValueError("similarity must be symmetric")
        if n and not np.all(np.diag(sim) == 1.0):
            raise ValueError("similarity diagonal must be 1")
        if np.any(sim < 0.0) or np.any(sim > 1.0):
            raise ValueError("similarity entries must lie in [0, 1]")
        if self.binary and not np.all((sim == 0.0) | (sim == 1.0)):
            raise ValueError("binary similarity entries must be 0 or 1")
        if self.residual_rule not in RESIDUAL_RULES:
            raise ValueError(f"unknown residual rule {self.residual_rule!r}")
        sim.setflags(write=False)
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "similarity", sim)

    def __len__(self) -> int:
        return len(self.entities)

    @classmethod
    def independent(cls, entities: Sequence[Entity]) -> "DiversityInstance":
        """No two entities interact."""
        return cls(tuple(entities), np.eye(len(entities)))


def _as_order(instance: DiversityInstance, ranking: Ranking | Sequence[int]) -> tuple[int, ...]:
    order = tuple(ranking.order) if isinstance(ranking, Ranking) else tuple(int(i) for i in ranking)
    if isinstance(ranking, Ranking) and len(ranking.entities) != len(instance):
        raise ValueError(f"ranking covers {len(ranking.entities)} entities, instance has {len(instance)}")
    if sorted(order) != list(range(len(instance))):
        raise ValueError(f"order {order} is not a permutation of the instance's {len(instance)} entities")
    return order


def residual_utilities(instance: DiversityInstance, ranking: Ranking | Sequence[int]) -> list[float]:
    """Residual utility at each position of the ranking."""
    order = _as_order(instance, ranking)
    sim = instance.similarity
    out = []
    for pos, i in enumerate(order):
        above = order[:pos]
        u = instance.entities[i].utility
        if instance.residual_rule == ZERO_IF_DUPLICATE_ABOVE:
            out.append(0.0 if any(sim[i, j] == 1.0 for j in above) else u)
        else:
            for j in above:
                u *= 1.0 - sim[i, j]
            out.append(u)
    return out


def residual_expected_utility(instance: DiversityInstance, ranking: Ranking | Sequence[int]) -> float:
    order = _as_order(instance, ranking)
    ranked = Ranking(instance.entities, order)
    # same term order and summation as the plain objective, so they agree exactly without interaction
    return math.fsum(
        ur * click_probability(ranked, pos)
        for pos, ur in enumerate(residual_utilities(instance, order), start=1)
    )


def _residual_values(instance: DiversityInstance, perms: np.ndarray) -> np.ndarray:
    ents = instance.entities
    u = np.array([e.utility for e in ents])[perms]
    c = np.array([e.click_prob for e in ents])[perms]
    cont = 1.0 - (c + np.array([e.abandon_prob for e in ents])[perms])
    n = perms.shape[1]
    s = instance.similarity[perms[:, :, None], perms[:, None, :]]
    above = np.tril(np.ones((n, n), dtype=bool), k=-1)
    if instance.residual_rule == ZERO_IF_DUPLICATE_ABOVE:
        shadowed = ((s == 1.0) & above).any(axis=2)
        ur = np.where(shadowed, 0.0, u)
    else:
        ur = u * np.where(above, 1.0 - s, 1.0).prod(axis=2)
    view = np.ones_like(c)
    if n > 1:
        view[:, 1:] = np.cumprod(cont[:, :-1], axis=1)
    return (ur * c * view).sum(axis=1)


def brute_force_diversity(instance: DiversityInstance,
                          max_n: int = BRUTE_FORCE_MAX_N) -> tuple[Ranking, float]:
    """Best ordering by exhaustive search; lexicographically smallest on ties."""
    n = len(instance)
    if n == 0:
        raise ValueError("cannot rank an empty instance")
    if n > max_n:
        raise SizeGuardError(f"brute force limited to {max_n} entities, got {n}")
    order, value = argmax_lexicographic(
        permutation_chunks(n), lambda perms: _residual_values(instance, perms)
    )
    return Ranking(instance.entities, order), value


def greedy_diversity(instance: DiversityInstance) -> tuple[Ranking, float]:
    """Append, one slot at a time, the entity with the best residual CE score.

    A heuristic with no approximation guarantee.
    """
    n = len(instance)
    if n == 0:
        raise ValueError("cannot rank an empty instance")
    remaining = list(range(n))
    order: list[int] = []
    while remaining:
        best_i, best_s = remaining[0], -1.0
        for i in remaining:
            ur = residual_utilities_for(instance, order, i)
            e = instance.entities[i]
            s = ce_score(Entity(e.id, ur, e.click_prob, e.abandon_prob))
            if s > best_s:
                best_i, best_s = i, s
        order.append(best_i)
        remaining.remove(best_i)
    return Ranking(instance.entities, tuple(order)), residual_expected_utility(instance, order)


def residual_utilities_for(instance: DiversityInstance, prefix: Sequence[int], i: int) -> float:
    """Residual utility of entity ``i`` if placed directly after ``prefix``."""
    sim = instance.similarity
    u = instance.entities[i].utility
    if instance.residual_rule == ZERO_IF_DUPLICATE_ABOVE:
        return 0.0 if any(sim[i, j] == 1.0 for j in prefix) else u
    for j in prefix:
        u *= 1.0 - sim[i, j]
    return u


def _check_adjacency(adjacency) -> np.ndarray:
    adj = np.array(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adj.shape}")
    if not np.all((adj == 0) | (adj == 1)):
        raise ValueError("adjacency entries must be 0 or 1")
    if not np.array_equal(adj, adj.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(adj) != 0):
        raise ValueError("adjacency diagonal must be zero")
    return adj.astype(int)


def instance_from_graph(adjacency, params: tuple[float, float, float] = DEFAULT_GRAPH_PARAMS
                        ) -> DiversityInstance:
    """One entity per vertex, all sharing ``(utility, click_prob, abandon_prob)``;
    edges become similarity 1."""
    adj = _check_adjacency(adjacency)
    u, c, g = params
    ents = tuple(Entity(f"v{i}", u, c, g) for i in range(adj.shape[0]))
    sim = adj.astype(float)
    np.fill_diagonal(sim, 1.0)
    return DiversityInstance(ents, sim, ZERO_IF_DUPLICATE_ABOVE, binary=True)


def max_independent_set_bruteforce(adjacency, max_n: int = MIS_MAX_N) -> tuple[int, ...]:
    """Largest independent vertex set, lexicographically smallest among the largest."""
    adj = _check_adjacency(adjacency)
    n = adj.shape[0]
    if n > max_n:
        raise SizeGuardError(f"independent-set search limited to {max_n} vertices, got {n}")
    nbr = [sum(1 << j for j in range(n) if adj[i, j]) for i in range(n)]
    for size in range(n, 0, -1):
        for combo in itertools.combinations(range(n), size):
            mask = 0
            for v in combo:
                mask |= 1 << v
            if all(nbr[v] & mask == 0 for v in combo):
                return combo
    return ()


def nonzero_residual_prefix(instance: DiversityInstance, ranking: Ranking | Sequence[int]) -> tuple[int, ...]:
    """Entities (in rank order) that keep a nonzero residual utility."""
    order = _as_order(instance, ranking)
    return tuple(i for i, ur in zip(order, residual_utilities(instance, order)) if ur > 0.0)


def is_independent(adjacency, vertices: Sequence[int]) -> bool:
    adj = np.asarray(adjacency)
    return all(adj[a, b] == 0 for a, b in itertools.combinations(vertices, 2))


@dataclass(frozen=True)
class Correspondence:
    ranking: Ranking
    value: float
    top_set: tuple[int, ...]
    mis: tuple[int, ...]
    top_is_independent: bool

    @property
    def matches(self) -> bool:
        return self.top_is_independent and len(self.top_set) == len(self.mis)


def independent_set_correspondence(adjacency, params: tuple[float, float, float] = DEFAULT_GRAPH_PARAMS
                                   ) -> Correspondence:
    """Solve the graph's diversity instance exactly and compare with its maximum independent set."""
    inst = instance_from_graph(adjacency, params)
    ranking, value = brute_force_diversity(inst)
    top = nonzero_residual_prefix(inst, ranking)
    mis = max_independent_set_bruteforce(adjacency)
    return Correspondence(ranking, value, top, mis, is_independent(adjacency, top))

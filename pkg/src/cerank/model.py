"""Cascade click model: entities, rankings and closed-form click arithmetic.

A user scans a ranked list top to bottom. At each viewed entity they click it
with probability ``C``, abandon the list with probability ``gamma``, or move on
with probability ``1 - (C + gamma)``. A click ends the session.

Positions are 1-based throughout the package; entity indices are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

#: Slack allowed on ``click_prob + abandon_prob <= 1`` before rejecting.
PROB_TOL = 1e-12


class InvalidParameterError(ValueError):
    """A click-model parameter is outside its admissible range."""


def check_probabilities(click: float, abandon: float, where: str = "") -> None:
    prefix = f"{where}: " if where else ""
    if not (0.0 <= click <= 1.0):
        raise InvalidParameterError(f"{prefix}click_prob must lie in [0, 1], got {click!r}")
    if not (0.0 <= abandon <= 1.0):
        raise InvalidParameterError(f"{prefix}abandon_prob must lie in [0, 1], got {abandon!r}")
    if click + abandon > 1.0 + PROB_TOL:
        raise InvalidParameterError(
            f"{prefix}click_prob + abandon_prob exceeds 1 ({click!r} + {abandon!r})"
        )


@dataclass(frozen=True)
class Entity:
    """One rankable item.

    ``utility`` is whatever the ranking is maximising: document relevance,
    cost per click, or an advertiser's private value per click.
    """

    id: Hashable
    utility: float
    click_prob: float
    abandon_prob: float = 0.0

    def __post_init__(self) -> None:
        for name in ("utility", "click_prob", "abandon_prob"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParameterError(f"entity {self.id!r}: {name} must be a real number")
            if not math.isfinite(value):
                raise InvalidParameterError(f"entity {self.id!r}: {name} must be finite")
            object.__setattr__(self, name, float(value))
        if self.utility < 0:
            raise InvalidParameterError(f"entity {self.id!r}: utility must be >= 0, got {self.utility!r}")
        check_probabilities(self.click_prob, self.abandon_prob, where=f"entity {self.id!r}")

    @property
    def absorption(self) -> float:
        """Probability that the user stops at this entity (click or abandon)."""
        return self.click_prob + self.abandon_prob

    @property
    def continuation(self) -> float:
        return 1.0 - (self.click_prob + self.abandon_prob)


@dataclass(frozen=True)
class Ranking:
    """A permutation of ``entities`` together with per-position view probabilities.

    ``order[p]`` is the index (into ``entities``) of the entity shown at
    position ``p + 1``.
    """

    entities: tuple[Entity, ...]
    order: tuple[int, ...]
    view_probs: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        entities = tuple(self.entities)
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(entities))):
            raise ValueError(f"order {order} is not a permutation of 0..{len(entities) - 1}")
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "order", order)

        views = []
        v = 1.0
        for idx in order:
            views.append(v)
            v *= entities[idx].continuation
        object.__setattr__(self, "view_probs", tuple(views))

    @classmethod
    def identity(cls, entities: Sequence[Entity]) -> "Ranking":
        return cls(tuple(entities), tuple(range(len(entities))))

    def __len__(self) -> int:
        return len(self.order)

    def entity_at(self, position: int) -> Entity:
        _check_position(self, position)
        return self.entities[self.order[position - 1]]

    @property
    def ids(self) -> list[Hashable]:
        return [self.entities[i].id for i in self.order]

    @property
    def exhaustion_prob(self) -> float:
        """Probability that the user scans past the last position."""
        if not self.order:
            return 1.0
        return self.view_probs[-1] * self.entities[self.order[-1]].continuation


@dataclass(frozen=True)
class UtilityReport:
    expected_utility: float
    per_position_contribution: tuple[float, ...]


def _check_position(ranking: Ranking, position: int) -> None:
    if not (1 <= position <= len(ranking.order)):
        raise IndexError(f"position {position} out of range 1..{len(ranking.order)}")


def view_probability(ranking: Ranking, position: int) -> float:
    """Probability that the entity at ``position`` is viewed."""
    _check_position(ranking, position)
    return ranking.view_probs[position - 1]


def click_probability(ranking: Ranking, position: int) -> float:
    return ranking.entity_at(position).click_prob * view_probability(ranking, position)


def abandon_probability(ranking: Ranking, position: int) -> float:
    return ranking.entity_at(position).abandon_prob * view_probability(ranking, position)


def expected_utility(ranking: Ranking) -> UtilityReport:
    """Expected utility of the clicked entity, with the per-position breakdown."""
    contributions = tuple(
        ranking.entity_at(p).utility * click_probability(ranking, p)
        for p in range(1, len(ranking) + 1)
    )
    return UtilityReport(math.fsum(contributions), contributions)

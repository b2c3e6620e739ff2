"""Monte-Carlo replay of the cascade browsing flow.

Each visited position consumes one uniform draw ``u``: ``u < C`` is a click,
``C <= u < C + gamma`` is abandonment, anything else continues down the list.

Seeding: trials are grouped in fixed-size blocks and block ``b`` draws from
``numpy.random.default_rng([master_seed, b])``. Blocks are therefore
independent of each other and of evaluation order, and can be run in any
order or in parallel without changing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cerank.model import Ranking

BLOCK_SIZE = 8192

VIEWED = "viewed"
CLICKED = "clicked"
ABANDONED = "abandoned"
CONTINUED = "continued"
EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class TrialTrace:
    """Event log of one browsing session.

    ``terminal`` is ``(kind, position)`` with kind one of ``clicked``,
    ``abandoned`` or ``exhausted`` (position ``None`` for the last).
    """

    events: tuple[tuple[int, str], ...]
    terminal: tuple[str, int | None]


@dataclass(frozen=True)
class SimulationEstimate:
    mean_utility: float
    std_error: float
    trials: int
    per_position_click_freq: tuple[float, ...]


def _outcome(ranking: Ranking, draws) -> tuple[str, int | None]:
    for pos, idx in enumerate(ranking.order, start=1):
        e = ranking.entities[idx]
        u = draws[pos - 1]
        if u < e.click_prob:
            return CLICKED, pos
        if u < e.click_prob + e.abandon_prob:
            return ABANDONED, pos
    return EXHAUSTED, None


def simulate_trial(ranking: Ranking, rng: np.random.Generator) -> TrialTrace:
    draws = rng.random(len(ranking))
    kind, stop = _outcome(ranking, draws)
    last = stop if stop is not None else len(ranking)
    events: list[tuple[int, str]] = []
    for pos in range(1, last + 1):
        events.append((pos, VIEWED))
        events.append((pos, kind if pos == stop else CONTINUED))
    return TrialTrace(tuple(events), (kind, stop))


def _block_click_counts(ranking: Ranking, draws: np.ndarray) -> np.ndarray:
    """Clicks per position for a (trials, n) block of uniforms."""
    ents = [ranking.entities[i] for i in ranking.order]
    click = np.array([e.click_prob for e in ents])
    absorb = np.array([e.click_prob + e.abandon_prob for e in ents])
    stopped = draws < absorb
    any_stop = stopped.any(axis=1)
    first = np.argmax(stopped, axis=1)
    rows = np.arange(draws.shape[0])
    clicked = any_stop & (draws[rows, first] < click[first])
    return np.bincount(first[clicked], minlength=len(ents))


def click_counts(ranking: Ranking, trials: int, master_seed: int,
                 block_size: int = BLOCK_SIZE) -> np.ndarray:
    n = len(ranking)
    counts = np.zeros(n, dtype=np.int64)
    done = 0
    block = 0
    while done < trials:
        size = min(block_size, trials - done)
        rng = np.random.default_rng([master_seed, block])
        counts += _block_click_counts(ranking, rng.random((size, n)))
        done += size
        block += 1
    return counts


def estimate_expected_utility(ranking: Ranking, trials: int, master_seed: int,
                              block_size: int = BLOCK_SIZE) -> SimulationEstimate:
    """Sample mean of the clicked entity's utility (0 when nothing is clicked)."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    counts = click_counts(ranking, trials, master_seed, block_size)
    utils = [ranking.entities[i].utility for i in ranking.order]

    # the per-trial utility takes at most n + 1 distinct values, so moments
    # follow exactly from the click counts
    mean = math.fsum(int(k) * u for k, u in zip(counts, utils)) / trials
    no_click = trials - int(counts.sum())
    if trials > 1:
        ss = math.fsum(int(k) * (u - mean) ** 2 for k, u in zip(counts, utils))
        ss += no_click * mean * mean
        std_error = math.sqrt(ss / (trials - 1)) / math.sqrt(trials)
    else:
        std_error = 0.0
    return SimulationEstimate(
        mean_utility=mean,
        std_error=std_error,
        trials=trials,
        per_position_click_freq=tuple(float(k) / trials for k in counts),
    )

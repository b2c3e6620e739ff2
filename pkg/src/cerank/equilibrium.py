"""Equilibrium bids for the CE mechanism and exhaustive envy-freeness checks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from cerank.mechanism import (
    Advertiser,
    BidVector,
    pricing_weight,
    run_ce_auction,
    settle,
    social_revenue_bound,
    vcg_allocation,
    vcg_prices,
)
from cerank.ranking import ce_score

DEFAULT_TOLERANCE = 1e-9


def social_order(ads: Sequence[Advertiser]) -> tuple[int, ...]:
    """Indices sorted by descending ``v c / mu`` (stable)."""
    keys = [ce_score(a.as_entity()) for a in ads]
    return tuple(sorted(range(len(ads)), key=lambda i: -keys[i]))


def tie_groups(ads: Sequence[Advertiser], rtol: float = 1e-12) -> list[tuple[int, ...]]:
    """Runs of advertisers whose ``v c / mu`` coincide; the order among them is arbitrary."""
    order = social_order(ads)
    keys = [ce_score(ads[i].as_entity()) for i in order]
    groups, run = [], [order[0]] if order else []
    for prev, cur, i in zip(keys, keys[1:], order[1:]):
        if abs(prev - cur) <= rtol * max(abs(prev), 1.0):
            run.append(i)
        else:
            if len(run) > 1:
                groups.append(tuple(run))
            run = [i]
    if len(run) > 1:
        groups.append(tuple(run))
    return groups


def equilibrium_bids(ads: Sequence[Advertiser]) -> tuple[BidVector, tuple[int, ...]]:
    """Envy-free equilibrium bids, built from the bottom slot upwards.

    Returns the bids (aligned with ``ads``) and the ``v c / mu`` order used.
    With nothing below, the last ad bids ``v mu``; above it each ad bids
    ``(mu/c) [v c + (1 - mu) b' c' / mu']`` where primes denote the ad below.
    Ads that are never clicked bid zero.
    """
    order = social_order(ads)
    bids = [0.0] * len(ads)
    below = 0.0  # b' c' / mu' of the ad below; zero past the bottom
    for i in reversed(order):
        a = ads[i]
        if a.ctr == 0.0:
            bids[i] = 0.0
            below = 0.0
            continue
        bids[i] = a.mu / a.ctr * (a.value * a.ctr + (1.0 - a.mu) * below)
        below = bids[i] * a.ctr / a.mu
    return BidVector(bids), order


def overture_equilibrium_bids(ads: Sequence[Advertiser]) -> BidVector:
    """Closed form for zero abandonment: ``b = v c + (1 - c) b'``."""
    order = social_order(ads)
    bids = [0.0] * len(ads)
    below = 0.0
    for i in reversed(order):
        a = ads[i]
        bids[i] = a.value * a.ctr + (1.0 - a.ctr) * below
        below = bids[i]
    return BidVector(bids)


def gsp_equilibrium_bids(ads: Sequence[Advertiser], k: float) -> BidVector:
    """Closed form when every ad has ``gamma = k - c``: ``b = v k + (1 - k) b' c' / c``."""
    order = social_order(ads)
    bids = [0.0] * len(ads)
    below = 0.0  # b' c' of the ad below
    for i in reversed(order):
        a = ads[i]
        bids[i] = a.value * k + (1.0 - k) * below / a.ctr if a.ctr > 0 else 0.0
        below = bids[i] * a.ctr
    return BidVector(bids)


def deviation_profit(ads: Sequence[Advertiser], bids: Sequence[float], i: int,
                     m: int | None) -> float:
    """Expected profit of ad ``i`` if it bid just enough to land in slot ``m``.

    Others keep their bids and relative order. The ad then pays the
    minimum-bid price set by whoever ends up directly beneath it, with ties
    resolved in its favour. ``m=None`` means leaving the auction (profit 0).
    """
    n = len(ads)
    if not (0 <= i < n):
        raise IndexError(f"advertiser {i} out of range 0..{n - 1}")
    if m is None:
        return 0.0
    if not (1 <= m <= n):
        raise IndexError(f"position {m} out of range 1..{n}")
    current = run_ce_auction(ads, bids).allocation
    others = [j for j in current if j != i]
    order = others[: m - 1] + [i] + others[m - 1:]

    a = ads[i]
    w_i = pricing_weight(a)
    if m < n and w_i > 0.0:
        j = order[m]
        price = pricing_weight(ads[j]) * bids[j] / w_i
    else:
        price = 0.0
    prices = [0.0] * n
    prices[m - 1] = price
    outcome = settle("ce", ads, bids, order, prices)
    return outcome.advertiser_profits[m - 1]


def current_profits(ads: Sequence[Advertiser], bids: Sequence[float]) -> list[float]:
    """Profit of each ad (indexed like ``ads``) under the CE auction."""
    outcome = run_ce_auction(ads, bids)
    out = [0.0] * len(ads)
    for i, p in zip(outcome.allocation, outcome.advertiser_profits):
        out[i] = p
    return out


def move_up_prices(ads: Sequence[Advertiser], bids: Sequence[float], i: int) -> list[float]:
    """Price ad ``i`` would pay in each slot from its own up to the top.

    Listed from the current slot upwards.
    """
    alloc = run_ce_auction(ads, bids).allocation
    pos = alloc.index(i)
    w_i = pricing_weight(ads[i])
    out = []
    for m in range(pos, -1, -1):
        if w_i == 0.0:
            out.append(0.0)
            continue
        if m == pos:
            below = alloc[pos + 1] if pos + 1 < len(alloc) else None
        else:
            below = alloc[m]  # the ad it displaces drops just beneath it
        out.append(pricing_weight(ads[below]) * bids[below] / w_i if below is not None else 0.0)
    return out


@dataclass(frozen=True)
class EquilibriumReport:
    bids: BidVector
    is_envy_free: bool
    worst_violation: float
    se_revenue: float
    social_revenue: float
    vcg_truthful_revenue: float
    order: tuple[int, ...] = ()
    worst_deviation: tuple[int, int | None] | None = None
    ce_prices: tuple[float, ...] = ()
    vcg_prices: tuple[float, ...] = ()
    price_gaps: tuple[float, ...] = ()
    ties: tuple[tuple[int, ...], ...] = ()


def _vcg_truthful(ads: Sequence[Advertiser]):
    truthful = [a.value for a in ads]
    alloc = vcg_allocation(ads, truthful)
    prices = vcg_prices(ads, truthful, alloc)
    return settle("vcg", ads, truthful, alloc, prices)


def verify_equilibrium(ads: Sequence[Advertiser], bids: Sequence[float],
                       tolerance: float = DEFAULT_TOLERANCE) -> EquilibriumReport:
    """Try every advertiser in every slot (and dropping out); report the best gain."""
    bids = BidVector(bids)
    outcome = run_ce_auction(ads, bids)
    base = current_profits(ads, bids)
    worst, worst_at = 0.0, None
    for i in range(len(ads)):
        for m in [*range(1, len(ads) + 1), None]:
            gain = deviation_profit(ads, bids, i, m) - base[i]
            if gain > worst:
                worst, worst_at = gain, (i, m)
    vcg = _vcg_truthful(ads)
    return EquilibriumReport(
        bids=bids,
        is_envy_free=worst <= tolerance,
        worst_violation=worst,
        se_revenue=outcome.se_revenue,
        social_revenue=social_revenue_bound(ads),
        vcg_truthful_revenue=vcg.se_revenue,
        order=outcome.allocation,
        worst_deviation=worst_at,
        ce_prices=outcome.prices,
        vcg_prices=vcg.prices,
        ties=tuple(tie_groups(ads)),
    )


def vcg_equivalence_check(ads: Sequence[Advertiser],
                          tolerance: float = DEFAULT_TOLERANCE) -> EquilibriumReport:
    """Compare CE prices at equilibrium bids with truthful VCG prices, slot by slot."""
    bids, _ = equilibrium_bids(ads)
    report = verify_equilibrium(ads, bids, tolerance)
    gaps = tuple(abs(p - q) for p, q in zip(report.ce_prices, report.vcg_prices))
    return replace(report, price_gaps=gaps)


def step_one_holds(ads: Sequence[Advertiser], bids: Sequence[float], rtol: float = 1e-12) -> bool:
    """Along the ``v c / mu`` order, ``w b`` is non-increasing and each ``w b``
    lies between the next one and the ad's own ``v c / mu``."""
    order = social_order(ads)
    wb = [pricing_weight(ads[i]) * bids[i] for i in order] + [0.0]
    own = [ce_score(ads[i].as_entity()) for i in order]
    for p in range(len(order)):
        slack = rtol * max(1.0, abs(wb[p]), abs(own[p]))
        lo, hi = min(wb[p + 1], own[p]), max(wb[p + 1], own[p])
        if not (lo - slack <= wb[p] <= hi + slack) or wb[p] < wb[p + 1] - slack:
            return False
    return True


def total_value_gap(ads: Sequence[Advertiser]) -> float:
    """|realised total value at equilibrium - social optimum|."""
    bids, _ = equilibrium_bids(ads)
    return abs(run_ce_auction(ads, bids).total_revenue - social_revenue_bound(ads))


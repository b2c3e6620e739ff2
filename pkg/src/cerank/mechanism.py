"""Position auctions under the cascade click model.

The CE mechanism orders ads by ``w * b`` with ``w = c / (c + gamma)`` and
charges each ad, per click, the smallest bid that would keep its slot. GSP,
Overture and VCG pricing are provided on the same footing so they can be
compared bid-for-bid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

from cerank.model import Entity, InvalidParameterError, check_probabilities, expected_utility
from cerank.ranking import ce_score, rank_by_ce


@dataclass(frozen=True)
class Advertiser:
    id: Hashable
    value: float
    ctr: float
    abandon_prob: float = 0.0

    def __post_init__(self) -> None:
        for name in ("value", "ctr", "abandon_prob"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidParameterError(f"advertiser {self.id!r}: {name} must be a finite real")
            object.__setattr__(self, name, float(v))
        if self.value < 0:
            raise InvalidParameterError(f"advertiser {self.id!r}: value must be >= 0")
        check_probabilities(self.ctr, self.abandon_prob, where=f"advertiser {self.id!r}")

    @property
    def mu(self) -> float:
        return self.ctr + self.abandon_prob

    @property
    def w(self) -> float:
        return pricing_weight(self)

    def as_entity(self, utility: float | None = None) -> Entity:
        """The ad as a rankable entity; utility defaults to the private value."""
        return Entity(self.id, self.value if utility is None else utility, self.ctr, self.abandon_prob)


def pricing_weight(a: Advertiser) -> float:
    """``c / (c + gamma)``; zero for an ad that is never clicked."""
    if a.ctr == 0.0:
        return 0.0
    return a.ctr / (a.ctr + a.abandon_prob)


class BidVector(tuple):
    """Per-advertiser bids, aligned with the advertiser list."""

    def __new__(cls, bids: Sequence[float] = ()):
        vals = []
        for b in bids:
            b = float(b)
            if not math.isfinite(b) or b < 0:
                raise InvalidParameterError(f"bids must be finite and >= 0, got {b!r}")
            vals.append(b)
        return super().__new__(cls, vals)


@dataclass(frozen=True)
class AuctionOutcome:
    """Result of one auction; every per-position tuple follows ``allocation``.

    ``allocation[p]`` is the advertiser index in slot ``p + 1``.
    """

    mechanism: str
    allocation: tuple[int, ...]
    bids: tuple[float, ...]
    prices: tuple[float, ...]
    click_probs: tuple[float, ...]
    advertiser_profits: tuple[float, ...]
    se_revenue: float
    total_revenue: float


def _check(ads: Sequence[Advertiser], bids: Sequence[float]) -> BidVector:
    if not ads:
        raise ValueError("auction needs at least one advertiser")
    bids = bids if isinstance(bids, BidVector) else BidVector(bids)
    if len(bids) != len(ads):
        raise ValueError(f"{len(bids)} bids for {len(ads)} advertisers")
    return bids


def _order(keys: Sequence[float]) -> tuple[int, ...]:
    return tuple(sorted(range(len(keys)), key=lambda i: -keys[i]))


def slot_click_probs(ads: Sequence[Advertiser], allocation: Sequence[int]) -> tuple[float, ...]:
    probs = []
    view = 1.0
    for i in allocation:
        probs.append(ads[i].ctr * view)
        view *= 1.0 - ads[i].mu
    return tuple(probs)


def settle(mechanism: str, ads: Sequence[Advertiser], bids: Sequence[float],
           allocation: Sequence[int], prices: Sequence[float]) -> AuctionOutcome:
    """Build the outcome and revenue split for fixed allocation and prices."""
    allocation = tuple(allocation)
    clicks = slot_click_probs(ads, allocation)
    pay = [p * q for p, q in zip(prices, clicks)]
    profits = tuple((ads[i].value - p) * q for i, p, q in zip(allocation, prices, clicks))
    return AuctionOutcome(
        mechanism=mechanism,
        allocation=allocation,
        bids=tuple(bids[i] for i in allocation),
        prices=tuple(float(p) for p in prices),
        click_probs=clicks,
        advertiser_profits=profits,
        se_revenue=math.fsum(pay),
        total_revenue=math.fsum(ads[i].value * q for i, q in zip(allocation, clicks)),
    )


def ce_allocation(ads: Sequence[Advertiser], bids: Sequence[float]) -> tuple[int, ...]:
    return _order([pricing_weight(a) * b for a, b in zip(ads, bids)])


def ce_prices(ads: Sequence[Advertiser], bids: Sequence[float],
              allocation: Sequence[int]) -> list[float]:
    prices = []
    for pos, i in enumerate(allocation):
        w_i = pricing_weight(ads[i])
        if pos + 1 == len(allocation) or w_i == 0.0:
            prices.append(0.0)
            continue
        j = allocation[pos + 1]
        prices.append(pricing_weight(ads[j]) * bids[j] / w_i)
    return prices


def run_ce_auction(ads: Sequence[Advertiser], bids: Sequence[float]) -> AuctionOutcome:
    bids = _check(ads, bids)
    allocation = ce_allocation(ads, bids)
    return settle("ce", ads, bids, allocation, ce_prices(ads, bids, allocation))


def run_gsp_auction(ads: Sequence[Advertiser], bids: Sequence[float]) -> AuctionOutcome:
    """Rank by ``c * b`` and charge ``b' c' / c`` from the ad below."""
    bids = _check(ads, bids)
    allocation = _order([a.ctr * b for a, b in zip(ads, bids)])
    prices = []
    for pos, i in enumerate(allocation):
        if pos + 1 == len(allocation) or ads[i].ctr == 0.0:
            prices.append(0.0)
            continue
        j = allocation[pos + 1]
        prices.append(bids[j] * ads[j].ctr / ads[i].ctr)
    return settle("gsp", ads, bids, allocation, prices)


def run_overture_auction(ads: Sequence[Advertiser], bids: Sequence[float]) -> AuctionOutcome:
    """Rank by bid, pay the next bid down."""
    bids = _check(ads, bids)
    allocation = _order(list(bids))
    prices = [bids[allocation[p + 1]] if p + 1 < len(allocation) else 0.0
              for p in range(len(allocation))]
    return settle("overture", ads, bids, allocation, prices)


def vcg_allocation(ads: Sequence[Advertiser], bids: Sequence[float]) -> tuple[int, ...]:
    """Bid-optimal order: descending ``b c / mu``.

    Computed with the same ``w * b`` key as the CE mechanism so the two orders
    coincide exactly, ties included.
    """
    return ce_allocation(ads, bids)


def _vcg_sum(ads, bids, allocation) -> list[float]:
    # per click: (mu_i / c_i) * sum_{j>i} b_j c_j prod_{i<k<j} (1 - mu_k)
    n = len(allocation)
    prices = []
    for pos in range(n):
        a = ads[allocation[pos]]
        if a.ctr == 0.0:
            prices.append(0.0)
            continue
        terms = []
        reach = 1.0
        for j in allocation[pos + 1:]:
            terms.append(bids[j] * ads[j].ctr * reach)
            reach *= 1.0 - ads[j].mu
        prices.append(a.mu / a.ctr * math.fsum(terms))
    return prices


def _vcg_recursive(ads, bids, allocation) -> list[float]:
    # tail sum S_i = b_{i+1} c_{i+1} + (1 - mu_{i+1}) S_{i+1}, price = (mu_i / c_i) S_i
    n = len(allocation)
    prices = [0.0] * n
    tail = 0.0
    for pos in range(n - 1, -1, -1):
        a = ads[allocation[pos]]
        prices[pos] = a.mu / a.ctr * tail if a.ctr > 0.0 else 0.0
        tail = bids[allocation[pos]] * a.ctr + (1.0 - a.mu) * tail
    return prices


def vcg_prices(ads: Sequence[Advertiser], bids: Sequence[float],
               allocation: Sequence[int] | None = None) -> list[float]:
    """Per-click VCG prices by slot; the last slot pays nothing.

    Uses the bid-optimal allocation unless one is given. The direct sum is
    cross-checked against the tail recursion.
    """
    bids = _check(ads, bids)
    if allocation is None:
        allocation = vcg_allocation(ads, bids)
    direct = _vcg_sum(ads, bids, allocation)
    recursive = _vcg_recursive(ads, bids, allocation)
    for p, q in zip(direct, recursive):
        if abs(p - q) > 1e-9 * max(1.0, abs(p)):
            raise ArithmeticError(f"VCG summation {p!r} and recursion {q!r} disagree")
    return direct


def run_vcg_auction(ads: Sequence[Advertiser], bids: Sequence[float]) -> AuctionOutcome:
    bids = _check(ads, bids)
    allocation = vcg_allocation(ads, bids)
    return settle("vcg", ads, bids, allocation, vcg_prices(ads, bids, allocation))


MECHANISMS = {
    "ce": run_ce_auction,
    "gsp": run_gsp_auction,
    "overture": run_overture_auction,
    "vcg": run_vcg_auction,
}


def run_auction(mechanism: str, ads: Sequence[Advertiser], bids: Sequence[float]) -> AuctionOutcome:
    try:
        fn = MECHANISMS[mechanism]
    except KeyError:
        raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {sorted(MECHANISMS)}") from None
    return fn(ads, bids)


def ce_rank_values(ads: Sequence[Advertiser], outcome: AuctionOutcome) -> list[float]:
    """``p c / mu`` for each advertiser, indexed like ``ads``."""
    out = [0.0] * len(ads)
    for i, p in zip(outcome.allocation, outcome.prices):
        out[i] = ce_score(ads[i].as_entity(utility=p))
    return out


def social_revenue_bound(ads: Sequence[Advertiser]) -> float:
    """Largest total value any ranking can realise (ads sorted by ``v c / mu``)."""
    if not ads:
        return 0.0
    return expected_utility(rank_by_ce([a.as_entity() for a in ads])).expected_utility

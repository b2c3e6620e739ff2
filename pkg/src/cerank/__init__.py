"""Click-efficiency ranking, CE ad auctions and diversity ranking under a cascade click model."""

from cerank.model import Entity, InvalidParameterError, Ranking, UtilityReport, expected_utility
from cerank.ranking import RankingVariant, Variant, brute_force_optimal, ce_score, rank_by_ce, rank_by_variant
from cerank.mechanism import Advertiser, AuctionOutcome, BidVector, run_auction, run_ce_auction

__version__ = "0.1.0"

__all__ = [
    "Advertiser",
    "AuctionOutcome",
    "BidVector",
    "Entity",
    "InvalidParameterError",
    "Ranking",
    "RankingVariant",
    "UtilityReport",
    "Variant",
    "brute_force_optimal",
    "ce_score",
    "expected_utility",
    "rank_by_ce",
    "rank_by_variant",
    "run_auction",
    "run_ce_auction",
]

"""Sampled and full ranking metrics for held-out events."""

from .metrics import (
    evaluate,
    evaluate_peers,
    metrics_from_ranks,
    metrics_report,
    random_mrr_baseline,
    rank_of_target,
    score_ranks,
)
from .types import EvalConfig, RankingMetrics

__all__ = [
    "EvalConfig",
    "RankingMetrics",
    "evaluate",
    "evaluate_peers",
    "metrics_from_ranks",
    "metrics_report",
    "random_mrr_baseline",
    "rank_of_target",
    "score_ranks",
]

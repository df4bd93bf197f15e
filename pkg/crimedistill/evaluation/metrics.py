"""Ranking evaluation against the fixed popularity-sampled negatives of a bundle."""

import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np
import torch

from ..data.bundle import DatasetBundle
from ..data.types import EvalPair
from ..errors import DataError
from ..models.encoders import SequenceEncoder, encode
from ..models.types import SequenceBatch
from .types import EvalConfig, RankingMetrics

_LOG = logging.getLogger("crimedistill.evaluation")


def rank_of_target(scores: Sequence[float], target_position: int = 0) -> int:
    """1-based rank; every other candidate scoring at least as high ranks above the target."""
    values = np.asarray(scores, dtype=np.float64)
    target = values[target_position]
    others = np.delete(values, target_position)
    return 1 + int((others >= target).sum())


def metrics_from_ranks(ranks: Iterable[int], ns: Sequence[int] = (5, 10)) -> RankingMetrics:
    ranks = np.asarray(list(ranks), dtype=np.float64)
    if ranks.size == 0:
        raise ValueError("no ranks to aggregate")
    if (ranks < 1).any():
        raise ValueError("ranks are 1-based")
    gains = 1.0 / np.log2(ranks + 1.0)
    hr = {int(n): float((ranks <= n).mean()) for n in ns}
    ndcg = {int(n): float(np.where(ranks <= n, gains, 0.0).mean()) for n in ns}
    return RankingMetrics(hr=hr, ndcg=ndcg, mrr=float((1.0 / ranks).mean()), count=int(ranks.size))


def _candidate_ranks(logits: torch.Tensor, targets: torch.Tensor, negatives: List[np.ndarray]) -> torch.Tensor:
    width = max((len(neg) for neg in negatives), default=0)
    candidates = torch.zeros(len(negatives), width, dtype=torch.long)
    valid = torch.zeros(len(negatives), width, dtype=torch.bool)
    for row, neg in enumerate(negatives):
        if len(neg):
            candidates[row, : len(neg)] = torch.as_tensor(neg, dtype=torch.long)
            valid[row, : len(neg)] = True
    candidates, valid = candidates.to(logits.device), valid.to(logits.device)

    rows = torch.arange(len(targets), device=logits.device)
    target_scores = logits[rows, targets].unsqueeze(1)
    beaten = (logits.gather(1, candidates) >= target_scores) & valid
    return 1 + beaten.sum(dim=1)


def _full_ranks(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    rows = torch.arange(len(targets), device=logits.device)
    target_scores = logits[rows, targets].unsqueeze(1)
    # the target ties with itself
    return (logits >= target_scores).sum(dim=1)


@torch.no_grad()
def score_ranks(
    model: SequenceEncoder,
    pairs: Sequence[EvalPair],
    negatives: Optional[Sequence[np.ndarray]],
    config: Optional[EvalConfig] = None,
    device: "torch.device | str" = "cpu",
) -> np.ndarray:
    config = config or EvalConfig()
    if not config.full_ranking:
        if negatives is None or len(negatives) != len(pairs):
            raise DataError(
                f"negatives missing for evaluation: {0 if negatives is None else len(negatives)} lists for {len(pairs)} pairs"
            )

    encoder_config = model.config
    was_training = model.training
    model.eval()
    ranks: List[np.ndarray] = []
    try:
        for start in range(0, len(pairs), config.batch_size):
            chunk = pairs[start : start + config.batch_size]
            longest = max(len(pair.history) for pair in chunk)
            batch = SequenceBatch.from_histories(
                [pair.history for pair in chunk],
                pad_id=encoder_config.pad_id,
                mask_id=encoder_config.mask_id,
                seq_len=min(encoder_config.max_len, longest + 1),
                device=device,
            )
            logits = encode(batch, model)
            targets = torch.as_tensor([pair.target for pair in chunk], dtype=torch.long, device=logits.device)
            if config.full_ranking:
                chunk_ranks = _full_ranks(logits, targets)
            else:
                chunk_ranks = _candidate_ranks(logits, targets, list(negatives[start : start + config.batch_size]))
            ranks.append(chunk_ranks.cpu().numpy())
    finally:
        model.train(was_training)
    return np.concatenate(ranks) if ranks else np.zeros(0, dtype=np.int64)


def evaluate(
    model: SequenceEncoder,
    pairs: Sequence[EvalPair],
    negatives: Optional[Sequence[np.ndarray]],
    config: Optional[EvalConfig] = None,
    device: "torch.device | str" = "cpu",
) -> RankingMetrics:
    """Rank each held-out target against its negatives (or every class with full ranking)."""
    config = config or EvalConfig()
    ranks = score_ranks(model, pairs, negatives, config, device)
    metrics = metrics_from_ranks(ranks, config.ns)
    _LOG.debug("Evaluated %d pairs: %s", metrics.count, metrics.to_dict())
    return metrics


def metrics_report(
    metrics: RankingMetrics,
    dataset_id: str,
    checkpoint_id: str,
    peer_index: int,
    split: str,
    full_ranking: bool = False,
) -> dict:
    return {
        "dataset_id": dataset_id,
        "checkpoint_id": checkpoint_id,
        "peer_index": peer_index,
        "split": split,
        "protocol": "full" if full_ranking else "sampled",
        **metrics.to_dict(),
    }


def random_mrr_baseline(num_candidates: int = 101) -> float:
    """Expected MRR of a uniform scorer: H(n) / n."""
    return sum(1.0 / rank for rank in range(1, num_candidates + 1)) / num_candidates


def evaluate_peers(
    models: Sequence[SequenceEncoder],
    bundle: DatasetBundle,
    config: EvalConfig,
    indices: Optional[Sequence[int]] = None,
    device: "torch.device | str" = "cpu",
) -> List[RankingMetrics]:
    """Metrics for the chosen peers on the configured split of a bundle."""
    config.validate()
    split = bundle.split
    pairs = split.pairs(config.split)
    negatives = None if config.full_ranking else split.negatives(config.split)
    indices = range(len(models)) if indices is None else indices
    return [evaluate(models[k], pairs, negatives, config, device=device) for k in indices]

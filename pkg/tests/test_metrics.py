import math

import numpy as np
import pytest
import torch
from torch import nn

from crimedistill.data import EvalPair
from crimedistill.errors import DataError
from crimedistill.evaluation import (
    EvalConfig,
    evaluate,
    evaluate_peers,
    metrics_from_ranks,
    metrics_report,
    random_mrr_baseline,
    rank_of_target,
    score_ranks,
)
from crimedistill.models import EncoderConfig, init_params

from .helpers import tiny_encoder

NUM_CLASSES = 101


class RandomScorer(nn.Module):
    def __init__(self, seed: int) -> None:
        super().__init__()
        self.config = EncoderConfig(vocab_size=NUM_CLASSES, max_len=12)
        self.generator = torch.Generator().manual_seed(seed)

    def forward(self, batch):
        return torch.rand(len(batch), NUM_CLASSES, generator=self.generator, dtype=torch.float64)


class LastEventScorer(nn.Module):
    """Scores the most recent history event highest."""

    def __init__(self) -> None:
        super().__init__()
        self.config = EncoderConfig(vocab_size=NUM_CLASSES, max_len=12)

    def forward(self, batch):
        rows = torch.arange(len(batch))
        last = batch.ids[rows, batch.predict_pos - 1]
        logits = torch.zeros(len(batch), NUM_CLASSES)
        logits[rows, last] = 1.0
        return logits


def all_other_classes(target: int) -> np.ndarray:
    return np.array([c for c in range(NUM_CLASSES) if c != target])


def repeat_pairs(count: int, seed: int):
    rng = np.random.default_rng(seed)
    pairs, negatives = [], []
    for index in range(count):
        target = int(rng.integers(NUM_CLASSES))
        pairs.append(EvalPair(spot_index=index, history=np.array([target]), target=target))
        negatives.append(all_other_classes(target))
    return pairs, negatives


def test_rank_examples():
    assert rank_of_target([0.9, 0.5, 0.1]) == 1
    assert rank_of_target([0.1, 0.5, 0.9]) == 3
    assert rank_of_target([0.5, 0.5, 0.1]) == 2
    assert rank_of_target([0.5, 0.9, 0.1], target_position=1) == 1


def test_metric_examples():
    metrics = metrics_from_ranks([1, 6, 11])
    assert metrics.hr == {5: pytest.approx(1 / 3), 10: pytest.approx(2 / 3)}
    assert metrics.ndcg[5] == pytest.approx(1 / 3)
    assert metrics.ndcg[10] == pytest.approx((1 + 1 / math.log2(7)) / 3)
    assert metrics.mrr == pytest.approx((1 + 1 / 6 + 1 / 11) / 3)
    assert metrics.count == 3

    assert metrics_from_ranks([3]).ndcg[5] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        metrics_from_ranks([])


def test_metrics_match_sort_oracle():
    rng = np.random.default_rng(0)
    ranks, oracle = [], []
    for _ in range(1000):
        scores = rng.integers(0, 30, NUM_CLASSES).astype(float)
        # ties sort the target after every equal candidate
        order = sorted(range(NUM_CLASSES), key=lambda i: (-scores[i], i == 0))
        oracle.append(order.index(0) + 1)
        ranks.append(rank_of_target(scores))
    assert ranks == oracle

    metrics = metrics_from_ranks(ranks)
    for n in (5, 10):
        assert metrics.hr[n] == pytest.approx(np.mean([r <= n for r in oracle]))
        assert metrics.ndcg[n] == pytest.approx(np.mean([1 / math.log2(r + 1) if r <= n else 0.0 for r in oracle]))
    assert metrics.mrr == pytest.approx(np.mean([1 / r for r in oracle]))


def test_random_scorer_hits_the_analytic_mrr():
    pairs, negatives = repeat_pairs(4000, seed=1)
    metrics = evaluate(RandomScorer(seed=2), pairs, negatives)
    assert random_mrr_baseline(NUM_CLASSES) == pytest.approx(0.0514, abs=1e-4)
    assert metrics.mrr == pytest.approx(random_mrr_baseline(NUM_CLASSES), abs=0.01)
    assert metrics.hr[10] == pytest.approx(10 / NUM_CLASSES, abs=0.02)


def test_perfect_scorer_scores_one():
    pairs, negatives = repeat_pairs(50, seed=3)
    for config in (EvalConfig(), EvalConfig(full_ranking=True, batch_size=7)):
        metrics = evaluate(LastEventScorer(), pairs, negatives, config)
        assert metrics.to_dict() == {"HR@5": 1.0, "HR@10": 1.0, "NDCG@5": 1.0, "NDCG@10": 1.0, "MRR": 1.0, "count": 50}


def test_missing_negatives_are_a_data_error():
    pairs, negatives = repeat_pairs(4, seed=0)
    with pytest.raises(DataError):
        score_ranks(LastEventScorer(), pairs, None)
    with pytest.raises(DataError):
        score_ranks(LastEventScorer(), pairs, negatives[:3])


def test_evaluation_restores_training_mode(tiny_bundle):
    config = tiny_encoder(vocab_size=tiny_bundle.vocab.size, max_len=tiny_bundle.max_len)
    model = init_params(config, 0).train()
    split = tiny_bundle.split
    first = score_ranks(model, split.test_pairs, split.test_negatives)
    second = score_ranks(model, split.test_pairs, split.test_negatives, EvalConfig(batch_size=5))
    assert model.training
    np.testing.assert_array_equal(first, second)


def test_peers_are_ranked_against_bundle_negatives(tiny_bundle):
    config = tiny_encoder(vocab_size=tiny_bundle.vocab.size, max_len=tiny_bundle.max_len)
    models = [init_params(config, seed) for seed in (0, 1)]
    results = evaluate_peers(models, tiny_bundle, EvalConfig(split="val"))
    assert len(results) == 2
    for metrics in results:
        assert metrics.count == len(tiny_bundle.split.val_pairs)
        # at most eight negatives per pair
        assert metrics.hr[10] == 1.0

    sampled = evaluate_peers(models, tiny_bundle, EvalConfig(), indices=[1])
    full = evaluate_peers(models, tiny_bundle, EvalConfig(full_ranking=True), indices=[1])
    assert len(full) == 1
    assert full[0].mrr <= sampled[0].mrr

    report = metrics_report(results[0], tiny_bundle.dataset_id, "abc", 0, "val")
    assert report["protocol"] == "sampled" and report["NDCG@5"] == results[0].ndcg[5]

"""Scaled-down synthetic experiments and the real-data statistics check.

Both are opt-in: set CRIMEDISTILL_RUN_SLOW=1 for the synthetic runs (several
CPU minutes per run) and CRIMEDISTILL_NYC16 to a raw NYC16 export, optionally
with CRIMEDISTILL_NYC16_CONFIG naming a config whose `data.columns` maps its header.
"""

import os

import numpy as np
import pytest

from crimedistill.config import load_run_config
from crimedistill.data import DataConfig, build_bundle, read_records, synth_generate
from crimedistill.distill import DistillConfig
from crimedistill.evaluation import EvalConfig, evaluate_peers
from crimedistill.training import TrainerConfig, load_peers, run_training

from .helpers import tiny_encoder

SEEDS = [0, 1, 2, 3, 4]
VARIANTS = {
    "ce": {"method": "none", "peers": 1},
    "full": {},
    "no_ctc": {"no_ctc": True},
    "no_cnc": {"no_cnc": True},
}

slow = pytest.mark.skipif(os.getenv("CRIMEDISTILL_RUN_SLOW") != "1", reason="set CRIMEDISTILL_RUN_SLOW=1")


@pytest.fixture(scope="module")
def synthetic_results(tmp_path_factory):
    """NDCG@5 on the test split per variant, seed and peer."""
    root = tmp_path_factory.mktemp("experiments")
    results = {name: {} for name in VARIANTS}
    for seed in SEEDS:
        records = synth_generate(200, 40, 0.3, (20, 80), np.random.default_rng(seed))
        bundle = build_bundle(records, DataConfig(max_len=50, seed=seed))
        for name, overrides in VARIANTS.items():
            distill = DistillConfig(**overrides)
            config = TrainerConfig(
                epochs=20,
                batch_size=128,
                seed=seed,
                progress=False,
                distill=distill,
                encoders=[tiny_encoder(dropout=0.1) for _ in range(distill.peers)],
            )
            run_dir = root / f"seed{seed}" / name
            run_training(bundle, config, run_dir)
            models = load_peers(run_dir, "best")
            metrics = evaluate_peers(models, bundle, EvalConfig())
            results[name][seed] = [m.ndcg[5] for m in metrics]
    return results


def seed_score(results, name, seed):
    """NDCG@5 averaged over the peers of one run."""
    return float(np.mean(results[name][seed]))


def mean_score(results, name):
    return float(np.mean([seed_score(results, name, seed) for seed in SEEDS]))


@slow
@pytest.mark.slow
def test_distillation_beats_a_single_peer(synthetic_results):
    wins = sum(seed_score(synthetic_results, "full", seed) > seed_score(synthetic_results, "ce", seed) for seed in SEEDS)
    assert mean_score(synthetic_results, "full") >= mean_score(synthetic_results, "ce")
    assert wins >= 4


@slow
@pytest.mark.slow
def test_peers_end_up_equally_good(synthetic_results):
    for seed in SEEDS:
        first, second = synthetic_results["full"][seed]
        assert abs(first - second) < 0.02, seed


@slow
@pytest.mark.slow
def test_full_model_is_at_least_as_good_as_its_ablations(synthetic_results):
    full = mean_score(synthetic_results, "full")
    assert full >= mean_score(synthetic_results, "no_ctc")
    assert full >= mean_score(synthetic_results, "no_cnc")


@pytest.mark.slow
@pytest.mark.skipif(not os.getenv("CRIMEDISTILL_NYC16"), reason="set CRIMEDISTILL_NYC16 to the raw export")
def test_nyc16_statistics():
    config = load_run_config(os.getenv("CRIMEDISTILL_NYC16_CONFIG"))
    records = read_records(os.environ["CRIMEDISTILL_NYC16"], config.data)
    bundle = build_bundle(records, config.data)
    assert (bundle.stats["spots"], bundle.stats["records"], bundle.stats["event_classes"]) == (3229, 473887, 440)

import numpy as np
import pytest
import torch

from crimedistill.distill import (
    CurriculumState,
    DistillConfig,
    KeepSampling,
    Phase,
    crime_loss_peer,
    curriculum_mask,
    draw_curriculum,
    masked_nontarget_count,
    phase_gate,
    truncate_teacher,
    truncation_flags,
)
from crimedistill.errors import ConfigError

SKEWED = torch.tensor([100, 60, 40, 25, 15, 10, 6, 4, 2, 1], dtype=torch.float64)


# --- phase gate --------------------------------------------------------------


def test_phase_gate_examples():
    assert phase_gate(0.1, 0.2, 0.7, rand_draw=0.99) is Phase.SIMPLE
    assert phase_gate(0.1, 0.2, 0.7, rand_draw=0.0) is Phase.SIMPLE
    assert phase_gate(0.9, 0.2, 0.7, rand_draw=0.99) is Phase.DIFFICULT
    assert phase_gate(0.5, 0.2, 0.7, rand_draw=0.6) is Phase.SIMPLE
    assert phase_gate(0.5, 0.2, 0.7, rand_draw=0.4) is Phase.DIFFICULT


def test_phase_gate_mixes_in_the_middle():
    draws = np.random.default_rng(0).random(100_000)
    simple = sum(phase_gate(0.5, 0.2, 0.7, float(d)) is Phase.SIMPLE for d in draws)
    assert simple / len(draws) == pytest.approx(0.5, abs=0.01)


# --- masking -------------------------------------------------------------------


def test_masked_count_schedule():
    counts = [masked_nontarget_count(i / 10, 0.7, 10) for i in range(11)]
    assert counts == [9, 9, 8, 7, 6, 5, 4, 0, 0, 0, 0]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_mask_always_covers_target():
    targets = torch.randint(0, 10, (500,), generator=torch.Generator().manual_seed(0))
    for t in (0.0, 0.3, 0.4, 0.69, 0.7, 1.0):
        mask = curriculum_mask(t, 0.7, targets, SKEWED, generator=torch.Generator().manual_seed(1))
        assert mask[torch.arange(500), targets].all()
        expected = masked_nontarget_count(t, 0.7, 10) + 1
        assert (mask.sum(dim=1) == expected).all()


def test_late_training_masks_only_the_target():
    targets = torch.tensor([0, 5, 9])
    mask = curriculum_mask(0.8, 0.7, targets, SKEWED)
    assert mask.sum().item() == 3


def test_progress_zero_skips_nontarget_loss():
    targets = torch.tensor([0, 3, 7, 2])
    assert curriculum_mask(0.0, 0.7, targets, SKEWED).all()

    gen = torch.Generator().manual_seed(0)
    logits = [torch.randn(4, 10, generator=gen) for _ in range(2)]
    draw = draw_curriculum(CurriculumState.at(0, 10), targets, SKEWED, DistillConfig(), gen)
    assert draw.kept_count == 0 and draw.phase is Phase.SIMPLE
    tc, nc = crime_loss_peer(0, logits, targets, DistillConfig(), draw=draw)
    assert float(nc) == 0.0
    assert torch.isfinite(tc)


def test_kept_classes_favour_frequent_events():
    rows = 20_000
    targets = torch.zeros(rows, dtype=torch.long)
    mask = curriculum_mask(0.4, 0.7, targets, SKEWED, generator=torch.Generator().manual_seed(3))
    assert ((~mask).sum(dim=1) == 3).all()
    inclusion = (~mask).double().mean(dim=0)
    assert inclusion[0] == 0
    assert (inclusion[2:] < inclusion[1:-1]).all()
    assert float(inclusion.sum()) == pytest.approx(3.0)


def test_rank_and_topk_sampling():
    targets = torch.zeros(4_000, dtype=torch.long)
    mask = curriculum_mask(
        0.4, 0.7, targets, SKEWED, generator=torch.Generator().manual_seed(4), sampling=KeepSampling.RANK
    )
    inclusion = (~mask).double().mean(dim=0)
    assert inclusion[1] > inclusion[9]

    top = curriculum_mask(0.4, 0.7, torch.tensor([0, 2]), SKEWED, sampling=KeepSampling.TOPK)
    assert torch.nonzero(~top[0]).flatten().tolist() == [1, 2, 3]
    assert torch.nonzero(~top[1]).flatten().tolist() == [0, 1, 3]


def test_mask_is_reproducible_from_the_generator():
    targets = torch.randint(0, 10, (64,), generator=torch.Generator().manual_seed(0))
    first = curriculum_mask(0.5, 0.7, targets, SKEWED, generator=torch.Generator().manual_seed(9))
    second = curriculum_mask(0.5, 0.7, targets, SKEWED, generator=torch.Generator().manual_seed(9))
    assert torch.equal(first, second)


# --- truncation -----------------------------------------------------------------


def brute_force_flags(probs: np.ndarray, epsilon: float) -> np.ndarray:
    # ranks are distinct here, so rank = number of strictly smaller values
    ranks = np.array([[int((row < value).sum()) for value in row] for row in probs])
    return (ranks < epsilon * probs.shape[1]).all(axis=0)


def test_truncation_matches_exhaustive_ranks():
    rng = np.random.default_rng(0)
    for trial in range(50):
        first = rng.permutation(256) / 256.0 + 1e-3
        second = rng.permutation(256) / 256.0 + 1e-3
        if trial % 2 == 0:
            # force overlap in the bottom three
            low = np.argsort(first)[:3]
            second[low[: 1 + trial % 3]] = rng.random(1 + trial % 3) * 1e-4
        probs = np.stack([first, second])
        expected = brute_force_flags(probs, 0.01)
        flags = truncation_flags(torch.from_numpy(probs), 0.01)
        assert flags.numpy().tolist() == expected.tolist()

        adjusted = truncate_teacher(torch.from_numpy(probs), 0.01)
        assert torch.all(adjusted[:, flags] == 1.0)
        assert torch.equal(adjusted[:, ~flags], torch.from_numpy(probs)[:, ~flags])


def test_truncation_counts_ranks_below_epsilon_batch():
    probs = torch.arange(1, 257, dtype=torch.float64).div(300).expand(2, 256)
    flags = truncation_flags(probs, 0.01)
    assert torch.nonzero(flags).flatten().tolist() == [0, 1, 2]


def test_zero_epsilon_truncates_nothing():
    probs = torch.rand(2, 256, generator=torch.Generator().manual_seed(0))
    assert not truncation_flags(probs, 0.0).any()
    torch.testing.assert_close(truncate_teacher(probs, 0.0), probs)


def test_bottom_for_one_peer_only_is_kept():
    first = torch.linspace(0.01, 0.99, 10)
    second = first.flip(0)
    flags = truncation_flags(torch.stack([first, second]), 0.2)
    assert not flags.any()


# --- draws and configuration ---------------------------------------------------


def test_draw_is_deterministic_per_generator():
    targets = torch.randint(0, 10, (32,), generator=torch.Generator().manual_seed(0))
    state = CurriculumState.at(4, 10)
    a = draw_curriculum(state, targets, SKEWED, DistillConfig(), torch.Generator().manual_seed(5))
    b = draw_curriculum(state, targets, SKEWED, DistillConfig(), torch.Generator().manual_seed(5))
    assert a.phase is b.phase and a.rand_draw == b.rand_draw
    assert torch.equal(a.mask, b.mask)
    assert a.masked_count == 6 and a.kept_count == 3


def test_curriculum_state_progress():
    assert CurriculumState.at(3, 12).t == 0.25
    with pytest.raises(ValueError):
        CurriculumState.at(5, 4)
    with pytest.raises(ValueError):
        CurriculumState.at(0, 0)


def test_default_hyper_parameters():
    config = DistillConfig()
    config.validate()
    assert (config.alpha, config.beta, config.gamma) == (5.0, 1.0, 1.0)
    assert (config.tau0, config.tau1, config.epsilon, config.peers) == (0.2, 0.7, 0.01, 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"tau0": 0.7, "tau1": 0.2},
        {"tau0": 0.0},
        {"tau1": 1.0},
        {"alpha": -1.0},
        {"epsilon": 1.0},
        {"peers": 1},
        {"method": "kd"},
        {"keep_sampling": "uniform"},
        {"temperature": 0.0},
    ],
)
def test_invalid_distill_config(kwargs):
    with pytest.raises(ConfigError):
        DistillConfig(**kwargs).validate()


def test_single_peer_allowed_without_distillation():
    DistillConfig(peers=1, method="none").validate()

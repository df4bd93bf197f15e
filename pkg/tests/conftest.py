import numpy as np
import pytest
import torch

from crimedistill.data import DataConfig, build_bundle, synth_generate


@pytest.fixture(scope="session")
def synthetic_records():
    return synth_generate(
        n_spots=30,
        n_classes=16,
        switch_prob=0.3,
        seq_len_range=(8, 20),
        rng=np.random.default_rng(0),
    )


@pytest.fixture(scope="session")
def tiny_bundle(synthetic_records):
    return build_bundle(synthetic_records, DataConfig(max_len=12, num_negatives=8, seed=1))


@pytest.fixture
def float64():
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(previous)

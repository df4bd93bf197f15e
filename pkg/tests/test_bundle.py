import numpy as np
import pytest

from crimedistill.data import DataConfig, build_bundle, load_bundle, save_bundle
from crimedistill.errors import DataError


def test_saved_bundle_loads_back(tmp_path, tiny_bundle):
    save_bundle(tiny_bundle, tmp_path / "bundle")
    loaded = load_bundle(tmp_path / "bundle")

    assert loaded.dataset_id == tiny_bundle.dataset_id
    assert loaded.max_len == tiny_bundle.max_len
    assert loaded.vocab.classes == tiny_bundle.vocab.classes
    np.testing.assert_array_equal(loaded.vocab.frequency, tiny_bundle.vocab.frequency)
    assert [seq.events for seq in loaded.sequences] == [seq.events for seq in tiny_bundle.sequences]
    assert loaded.stats == tiny_bundle.stats

    original, restored = tiny_bundle.split, loaded.split
    assert len(restored.train_windows) == len(original.train_windows)
    for (a_in, a_t), (b_in, b_t) in zip(original.train_windows, restored.train_windows):
        np.testing.assert_array_equal(a_in, b_in)
        assert a_t == b_t
    for a, b in zip(original.test_pairs, restored.test_pairs):
        np.testing.assert_array_equal(a.history, b.history)
        assert (a.target, a.spot_index) == (b.target, b.spot_index)
    for a, b in zip(original.val_negatives, restored.val_negatives):
        np.testing.assert_array_equal(a, b)


def test_incomplete_bundle_is_a_data_error(tmp_path, tiny_bundle):
    save_bundle(tiny_bundle, tmp_path / "bundle")
    (tmp_path / "bundle" / "arrays.npz").unlink()
    with pytest.raises(DataError):
        load_bundle(tmp_path / "bundle")


def test_fingerprint_tracks_content(synthetic_records):
    first = build_bundle(synthetic_records, DataConfig(max_len=12, seed=1))
    again = build_bundle(synthetic_records, DataConfig(max_len=12, seed=1))
    reseeded = build_bundle(synthetic_records, DataConfig(max_len=12, seed=2))
    assert first.dataset_id == again.dataset_id
    assert first.dataset_id != reseeded.dataset_id


def test_statistics_describe_thinned_sequences(synthetic_records):
    bundle = build_bundle(synthetic_records, DataConfig(max_len=12, num_negatives=8, seed=1, drop_rate=0.5))
    stats = bundle.stats
    assert stats["records"] == len(synthetic_records)

    trained = stats["trained"]
    lengths = [len(seq) for seq in bundle.sequences]
    assert trained["spots"] == len(bundle.sequences) == stats["retained_spots"]
    assert trained["records"] == sum(lengths) < stats["records"]
    assert (trained["min_per_spot"], trained["max_per_spot"]) == (min(lengths), max(lengths))
    assert trained["avg_per_spot"] == pytest.approx(np.mean(lengths), abs=0.01)

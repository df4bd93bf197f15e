"""On-disk dataset bundle.

Layout of a bundle directory (format version 1):

    manifest.json     format version, dataset id, seed, max_len, counts
    vocabulary.json   classes as [slot, category], frequency, pad_id, mask_id
    sequences.json    spot keys in bundle order
    arrays.npz        ragged integer arrays stored as values + offsets:
                      sequences, train_inputs, train_targets,
                      {val,test}_histories, {val,test}_targets, {val,test}_spots,
                      {val,test}_negatives
    stats.json        dataset statistics written by `prepare`
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..errors import DataError
from .records import build_sequences, build_vocabulary, dataset_statistics
from .splits import build_split
from .types import DataConfig, DatasetSplit, EvalPair, EventRecord, SpotSequence, Vocabulary

_LOG = logging.getLogger("crimedistill.data")

FORMAT_VERSION = 1


@dataclass
class DatasetBundle:
    vocab: Vocabulary
    sequences: List[SpotSequence]
    split: DatasetSplit
    max_len: int
    seed: int
    dataset_id: str = ""
    stats: dict = field(default_factory=dict)


def _pack(rows: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    lengths = np.asarray([len(row) for row in rows], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    values = np.concatenate([np.asarray(row, dtype=np.int64) for row in rows]) if rows else np.zeros(0, np.int64)
    return values, offsets


def _unpack(values: np.ndarray, offsets: np.ndarray) -> List[np.ndarray]:
    return [values[offsets[i] : offsets[i + 1]].copy() for i in range(len(offsets) - 1)]


def dataset_fingerprint(vocab: Vocabulary, sequences: Sequence[SpotSequence], seed: int) -> str:
    digest = hashlib.sha256()
    digest.update(json.dumps(vocab.to_dict(), sort_keys=True).encode())
    for seq in sequences:
        digest.update(repr(seq.spot_key).encode())
        digest.update(np.asarray(seq.events, dtype=np.int64).tobytes())
    digest.update(str(seed).encode())
    return digest.hexdigest()[:16]


def save_bundle(bundle: DatasetBundle, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not bundle.dataset_id:
        bundle.dataset_id = dataset_fingerprint(bundle.vocab, bundle.sequences, bundle.seed)

    split = bundle.split
    arrays = {}
    for name, rows in (
        ("sequences", [np.asarray(seq.events) for seq in bundle.sequences]),
        ("train_inputs", [inputs for inputs, _ in split.train_windows]),
        ("val_histories", [pair.history for pair in split.val_pairs]),
        ("test_histories", [pair.history for pair in split.test_pairs]),
        ("val_negatives", split.val_negatives),
        ("test_negatives", split.test_negatives),
    ):
        arrays[f"{name}_values"], arrays[f"{name}_offsets"] = _pack(rows)
    arrays["train_targets"] = np.asarray([target for _, target in split.train_windows], dtype=np.int64)
    for prefix, pairs in (("val", split.val_pairs), ("test", split.test_pairs)):
        arrays[f"{prefix}_targets"] = np.asarray([pair.target for pair in pairs], dtype=np.int64)
        arrays[f"{prefix}_spots"] = np.asarray([pair.spot_index for pair in pairs], dtype=np.int64)
    np.savez_compressed(directory / "arrays.npz", **arrays)

    (directory / "vocabulary.json").write_text(json.dumps(bundle.vocab.to_dict(), indent=2))
    (directory / "sequences.json").write_text(json.dumps([list(seq.spot_key) for seq in bundle.sequences]))
    (directory / "stats.json").write_text(json.dumps(bundle.stats, indent=2))
    manifest = {
        "format_version": FORMAT_VERSION,
        "dataset_id": bundle.dataset_id,
        "seed": bundle.seed,
        "max_len": bundle.max_len,
        "num_classes": bundle.vocab.size,
        "num_spots": len(bundle.sequences),
        "num_train_windows": len(split.train_windows),
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    _LOG.info("Wrote dataset bundle %s to %s", bundle.dataset_id, directory)
    return directory


def load_bundle(directory: Union[str, Path]) -> DatasetBundle:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
        vocab = Vocabulary.from_dict(json.loads((directory / "vocabulary.json").read_text()))
        spot_keys = json.loads((directory / "sequences.json").read_text())
        stats_path = directory / "stats.json"
        stats = json.loads(stats_path.read_text()) if stats_path.exists() else {}
        arrays = dict(np.load(directory / "arrays.npz"))
    except FileNotFoundError as exc:
        raise DataError(f"incomplete dataset bundle at {directory}: {exc.filename}") from exc

    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported bundle format {manifest.get('format_version')!r}")

    def rows(name: str) -> List[np.ndarray]:
        return _unpack(arrays[f"{name}_values"], arrays[f"{name}_offsets"])

    sequences = [
        SpotSequence(spot_key=(key[0], key[1]), events=events.tolist())
        for key, events in zip(spot_keys, rows("sequences"))
    ]

    def pairs(prefix: str) -> List[EvalPair]:
        return [
            EvalPair(spot_index=int(spot), history=history, target=int(target))
            for spot, history, target in zip(arrays[f"{prefix}_spots"], rows(f"{prefix}_histories"), arrays[f"{prefix}_targets"])
        ]

    split = DatasetSplit(
        train_windows=[(inputs, int(target)) for inputs, target in zip(rows("train_inputs"), arrays["train_targets"])],
        val_pairs=pairs("val"),
        test_pairs=pairs("test"),
        val_negatives=rows("val_negatives"),
        test_negatives=rows("test_negatives"),
    )
    return DatasetBundle(
        vocab=vocab,
        sequences=sequences,
        split=split,
        max_len=int(manifest["max_len"]),
        seed=int(manifest["seed"]),
        dataset_id=str(manifest["dataset_id"]),
        stats=stats,
    )


def build_bundle(records: Sequence[EventRecord], config: DataConfig) -> DatasetBundle:
    """Raw records to a split, negative-sampled bundle with statistics attached."""
    vocab = build_vocabulary(records)
    sequences = build_sequences(
        records,
        vocab,
        min_events=config.min_events,
        drop_rate=config.drop_rate,
        seed=config.seed,
    )
    if not sequences:
        raise DataError(f"no spot has at least {config.min_events} events")
    split, vocab = build_split(sequences, vocab, config)
    stats = dataset_statistics(records, vocab, retained_spots=len(sequences), sequences=sequences)
    return DatasetBundle(
        vocab=vocab,
        sequences=sequences,
        split=split,
        max_len=config.max_len,
        seed=config.seed,
        dataset_id=dataset_fingerprint(vocab, sequences, config.seed),
        stats=stats,
    )

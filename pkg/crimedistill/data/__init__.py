"""Event ingestion, vocabulary, leave-last-out splits and negative sampling."""

from .bundle import DatasetBundle, build_bundle, load_bundle, save_bundle
from .negatives import popularity_negatives
from .records import (
    build_sequences,
    build_vocabulary,
    dataset_statistics,
    format_statistics,
    read_records,
    slot_of_timestamp,
    write_records,
)
from .splits import build_split, split_and_window
from .synthetic import synth_generate
from .types import (
    DataConfig,
    DatasetSplit,
    EvalPair,
    EventClass,
    EventRecord,
    SpotSequence,
    SynthConfig,
    Vocabulary,
)

__all__ = [
    "DataConfig",
    "DatasetBundle",
    "DatasetSplit",
    "EvalPair",
    "EventClass",
    "EventRecord",
    "SpotSequence",
    "SynthConfig",
    "Vocabulary",
    "build_bundle",
    "build_sequences",
    "build_split",
    "build_vocabulary",
    "dataset_statistics",
    "format_statistics",
    "load_bundle",
    "popularity_negatives",
    "read_records",
    "save_bundle",
    "slot_of_timestamp",
    "split_and_window",
    "synth_generate",
    "write_records",
]

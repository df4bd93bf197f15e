import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DataError
from .negatives import popularity_negatives
from .types import DataConfig, DatasetSplit, EvalPair, SpotSequence, Vocabulary

_LOG = logging.getLogger("crimedistill.data")


@dataclass
class SplitContribution:
    windows: List[np.ndarray]  # training chunks; input = chunk[:-1], target = chunk[-1]
    val: Tuple[np.ndarray, int]
    test: Tuple[np.ndarray, int]

    @property
    def train_prefix_length(self) -> int:
        return sum(len(chunk) for chunk in self.windows)


def window_bounds(length: int, max_len: int) -> List[Tuple[int, int]]:
    """Non-overlapping [start, stop) chunks of at most `max_len`, cut from the right."""
    bounds = []
    stop = length
    while stop > 0:
        start = max(0, stop - max_len)
        bounds.append((start, stop))
        stop = start
    return bounds


def split_and_window(seq: SpotSequence, max_len: int = 200) -> SplitContribution:
    if len(seq) < 3:
        raise DataError(f"spot {seq.spot_key} has {len(seq)} events; need at least 3 to split")
    events = np.asarray(seq.events, dtype=np.int64)
    history_cap = max_len - 1

    test = (events[:-1][-history_cap:], int(events[-1]))
    val = (events[:-2][-history_cap:], int(events[-2]))

    prefix = events[:-2]
    windows = [prefix[start:stop] for start, stop in window_bounds(len(prefix), max_len)]
    return SplitContribution(windows=windows, val=val, test=test)


def train_frequencies(contributions: Sequence[SplitContribution], num_classes: int) -> np.ndarray:
    counts = np.zeros(num_classes, dtype=np.int64)
    for part in contributions:
        for chunk in part.windows:
            counts += np.bincount(chunk, minlength=num_classes)
    return counts


def all_frequencies(sequences: Sequence[SpotSequence], num_classes: int) -> np.ndarray:
    counts = np.zeros(num_classes, dtype=np.int64)
    for seq in sequences:
        counts += np.bincount(np.asarray(seq.events, dtype=np.int64), minlength=num_classes)
    return counts


def build_split(
    sequences: Sequence[SpotSequence],
    vocab: Vocabulary,
    config: DataConfig,
) -> Tuple[DatasetSplit, Vocabulary]:
    """Leave-last-out split with popularity negatives; returns the vocabulary with frequencies filled in."""
    contributions = [split_and_window(seq, config.max_len) for seq in sequences]

    if config.popularity_source == "train":
        counts = train_frequencies(contributions, vocab.size)
    elif config.popularity_source == "all":
        counts = all_frequencies(sequences, vocab.size)
    else:
        raise DataError(f"unknown popularity source {config.popularity_source!r}")
    vocab = vocab.with_frequencies(counts)

    train_windows: List[Tuple[np.ndarray, int]] = []
    val_pairs: List[EvalPair] = []
    test_pairs: List[EvalPair] = []
    val_negatives: List[np.ndarray] = []
    test_negatives: List[np.ndarray] = []

    # one child seed per spot keeps sampling independent of processing order
    spot_seeds = np.random.SeedSequence(config.seed).spawn(len(sequences))
    short = 0
    for idx, (seq, part) in enumerate(zip(sequences, contributions)):
        for chunk in part.windows:
            if len(chunk) < 2:
                continue
            train_windows.append((chunk[:-1].copy(), int(chunk[-1])))

        val_pairs.append(EvalPair(spot_index=idx, history=part.val[0], target=part.val[1]))
        test_pairs.append(EvalPair(spot_index=idx, history=part.test[0], target=part.test[1]))

        rng = np.random.default_rng(spot_seeds[idx])
        interacted = set(seq.events)
        for bucket in (val_negatives, test_negatives):
            negatives = popularity_negatives(
                vocab,
                interacted,
                n=config.num_negatives,
                rng=rng,
                smoothing=config.negative_smoothing,
                warn=False,
            )
            short += int(len(negatives) < config.num_negatives)
            bucket.append(negatives.astype(np.int64))

    if short:
        _LOG.warning(
            "%d evaluation pairs have fewer than %d eligible negatives; they are ranked over what exists",
            short,
            config.num_negatives,
        )

    split = DatasetSplit(
        train_windows=train_windows,
        val_pairs=val_pairs,
        test_pairs=test_pairs,
        val_negatives=val_negatives,
        test_negatives=test_negatives,
    )
    _LOG.info(
        "Split %d spots into %d training windows, %d validation and %d test pairs",
        len(sequences),
        len(train_windows),
        len(val_pairs),
        len(test_pairs),
    )
    return split, vocab

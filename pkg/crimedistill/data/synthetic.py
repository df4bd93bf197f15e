"""Synthetic spots whose events come from a few switching hidden intents."""

import logging
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import List, Tuple

import numpy as np

from ..errors import ConfigError
from .types import NUM_SLOTS, SLOT_HOURS, EventClass, EventRecord

_LOG = logging.getLogger("crimedistill.data")

EPOCH_START = datetime(2016, 1, 1)
MIN_INTENTS = 2
MAX_INTENTS = 4


@dataclass
class Intent:
    support: np.ndarray  # class ids
    weights: np.ndarray  # sums to 1 over support


@dataclass
class SyntheticSpot:
    precinct: str
    premises: str
    intents: List[int]  # indices into the shared intent pool
    states: List[int]  # active intent (pool index) per step
    events: List[int]  # class ids


def class_of_id(class_id: int) -> EventClass:
    return EventClass(slot=class_id % NUM_SLOTS, category=f"C{class_id // NUM_SLOTS:03d}")


def _validate(n_spots: int, n_classes: int, switch_prob: float, seq_len_range: Tuple[int, int]) -> None:
    if n_spots < 1:
        raise ConfigError(f"n_spots must be positive, got {n_spots}")
    if n_classes < 4:
        raise ConfigError(f"n_classes must be at least 4, got {n_classes}")
    if not 0.0 <= switch_prob <= 1.0:
        raise ConfigError(f"switch_prob must lie in [0, 1], got {switch_prob}")
    low, high = seq_len_range
    if low < 1 or high < low:
        raise ConfigError(f"invalid sequence length range {seq_len_range}")


def intent_pool(n_classes: int, rng: np.random.Generator) -> List[Intent]:
    pool_size = max(MAX_INTENTS, n_classes // 4)
    support_size = max(2, n_classes // 5)
    pool = []
    for _ in range(pool_size):
        support = np.sort(rng.choice(n_classes, size=support_size, replace=False))
        weights = rng.dirichlet(np.full(support_size, 0.5))
        pool.append(Intent(support=support, weights=weights))
    return pool


def simulate_spots(
    n_spots: int,
    n_classes: int,
    switch_prob: float,
    seq_len_range: Tuple[int, int],
    rng: np.random.Generator,
) -> List[SyntheticSpot]:
    _validate(n_spots, n_classes, switch_prob, seq_len_range)
    pool = intent_pool(n_classes, rng)

    spots = []
    for spot in range(n_spots):
        n_intents = int(rng.integers(MIN_INTENTS, MAX_INTENTS + 1))
        intents = [int(idx) for idx in rng.choice(len(pool), size=n_intents, replace=False)]
        length = int(rng.integers(seq_len_range[0], seq_len_range[1] + 1))

        state = int(rng.integers(n_intents))
        states, events = [], []
        for step in range(length):
            if step > 0 and rng.random() < switch_prob:
                state = (state + int(rng.integers(1, n_intents))) % n_intents
            intent = pool[intents[state]]
            states.append(intents[state])
            events.append(int(rng.choice(intent.support, p=intent.weights)))

        spots.append(
            SyntheticSpot(
                precinct=f"P{spot % 77:03d}",
                premises=f"SPOT-{spot:05d}",
                intents=intents,
                states=states,
                events=events,
            )
        )
    return spots


def _timestamp(step: int, slot: int, rng: np.random.Generator) -> datetime:
    hour = slot * SLOT_HOURS + int(rng.integers(SLOT_HOURS))
    return EPOCH_START + timedelta(days=step, hours=hour, minutes=int(rng.integers(60)))


def synth_generate(
    n_spots: int,
    n_classes: int,
    switch_prob: float,
    seq_len_range: Tuple[int, int],
    rng: np.random.Generator,
) -> List[EventRecord]:
    spots = simulate_spots(n_spots, n_classes, switch_prob, seq_len_range, rng)
    records = []
    for spot in spots:
        for step, class_id in enumerate(spot.events):
            event_class = class_of_id(class_id)
            records.append(
                EventRecord(
                    precinct=spot.precinct,
                    premises=spot.premises,
                    timestamp=_timestamp(step, event_class.slot, rng),
                    category=event_class.category,
                )
            )
    _LOG.info("Generated %d synthetic records for %d spots", len(records), n_spots)
    return records

from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

SLOT_HOURS = 3
NUM_SLOTS = 24 // SLOT_HOURS

SpotKey = Tuple[str, str]


@dataclass(frozen=True)
class EventRecord:
    precinct: str
    premises: str
    timestamp: datetime  # minute resolution
    category: str

    @property
    def spot_key(self) -> SpotKey:
        return (self.precinct, self.premises)


@dataclass(frozen=True, order=True)
class EventClass:
    slot: int  # 3-hour slot of day, 0..7
    category: str


@dataclass
class Vocabulary:
    """Dense ids for event classes; pad and mask ids sit right after the real classes."""

    classes: List[EventClass]
    frequency: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.frequency is None:
            self.frequency = np.zeros(len(self.classes), dtype=np.int64)
        self.frequency = np.asarray(self.frequency, dtype=np.int64)
        if self.frequency.shape != (len(self.classes),):
            raise ValueError("frequency table must have one entry per class")
        if (self.frequency < 0).any():
            raise ValueError("frequencies must be non-negative")
        self._class_to_id: Dict[EventClass, int] = {cls: idx for idx, cls in enumerate(self.classes)}
        if len(self._class_to_id) != len(self.classes):
            raise ValueError("duplicate event classes in vocabulary")

    @property
    def size(self) -> int:
        return len(self.classes)

    @property
    def pad_id(self) -> int:
        return self.size

    @property
    def mask_id(self) -> int:
        return self.size + 1

    @property
    def total_tokens(self) -> int:
        return self.size + 2

    @property
    def class_to_id(self) -> Dict[EventClass, int]:
        return dict(self._class_to_id)

    def id_of(self, event_class: EventClass) -> int:
        return self._class_to_id[event_class]

    def get(self, event_class: EventClass) -> Optional[int]:
        return self._class_to_id.get(event_class)

    def with_frequencies(self, counts: Sequence[int]) -> "Vocabulary":
        return Vocabulary(classes=list(self.classes), frequency=np.asarray(counts, dtype=np.int64))

    def to_dict(self) -> dict:
        return {
            "classes": [[cls.slot, cls.category] for cls in self.classes],
            "frequency": self.frequency.tolist(),
            "pad_id": self.pad_id,
            "mask_id": self.mask_id,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Vocabulary":
        classes = [EventClass(slot=int(slot), category=str(category)) for slot, category in payload["classes"]]
        vocab = cls(classes=classes, frequency=np.asarray(payload["frequency"], dtype=np.int64))
        if payload.get("pad_id", vocab.pad_id) != vocab.pad_id or payload.get("mask_id", vocab.mask_id) != vocab.mask_id:
            raise ValueError("special token ids do not match the class count")
        return vocab


@dataclass
class SpotSequence:
    spot_key: SpotKey
    events: List[int]  # class ids, chronological

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class EvalPair:
    spot_index: int
    history: np.ndarray
    target: int


@dataclass
class DatasetSplit:
    train_windows: List[Tuple[np.ndarray, int]]
    val_pairs: List[EvalPair]
    test_pairs: List[EvalPair]
    val_negatives: List[np.ndarray]
    test_negatives: List[np.ndarray]

    def pairs(self, split: str) -> List[EvalPair]:
        if split in ("val", "validation"):
            return self.val_pairs
        if split == "test":
            return self.test_pairs
        raise ValueError(f"unknown split {split!r}")

    def negatives(self, split: str) -> List[np.ndarray]:
        if split in ("val", "validation"):
            return self.val_negatives
        if split == "test":
            return self.test_negatives
        raise ValueError(f"unknown split {split!r}")


@dataclass
class DataConfig:
    delimiter: str = ","
    # a list joins several columns with a space (NYPD exports split date and time)
    columns: Dict[str, object] = field(
        default_factory=lambda: {
            "precinct": "precinct",
            "premises": "premises",
            "timestamp": "timestamp",
            "category": "category",
        }
    )
    timestamp_format: Optional[str] = None
    max_len: int = 200
    min_events: int = 5
    num_negatives: int = 100
    popularity_source: str = "train"  # train | all
    negative_smoothing: float = 0.0
    drop_rate: float = 0.0
    seed: int = 42


@dataclass
class SynthConfig:
    n_spots: int = 200
    n_classes: int = 40
    switch_prob: float = 0.3
    seq_len_min: int = 20
    seq_len_max: int = 80
    seed: int = 7

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional

import torch

from ..distill.types import CurriculumState, DistillConfig, LossBreakdown, Phase
from ..errors import ConfigError
from ..models.types import EncoderConfig, SequenceBatch

HISTORY_SIZE = 1000


@dataclass
class TrainerConfig:
    epochs: int = 100  # Pi
    batch_size: int = 256
    lr: float = 1e-3
    grad_clip: float = 5.0
    seed: int = 42
    all_positions: bool = True
    shared_init: bool = False  # every peer starts from the same parameters
    device: str = "cpu"
    progress: bool = True
    distill: DistillConfig = field(default_factory=DistillConfig)
    encoders: List[EncoderConfig] = field(default_factory=list)  # one per peer; empty = default encoder for all

    @property
    def num_peers(self) -> int:
        return self.distill.peers

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 so samples can be ranked within a batch")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.grad_clip <= 0:
            raise ConfigError("grad_clip must be positive")
        self.distill.validate()
        if self.encoders and len(self.encoders) != self.num_peers:
            raise ConfigError(f"{len(self.encoders)} encoder configs for {self.num_peers} peers")


@dataclass(frozen=True)
class TrainBatch:
    inputs: SequenceBatch
    labels: torch.Tensor  # [B] long

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class StepResult:
    step: int
    phase: Optional[Phase]
    lr: float
    peers: List[LossBreakdown]
    rand_draw: Optional[float] = None
    masked: Optional[int] = None  # non-target classes hidden from distillation

    def log_record(self, state: CurriculumState) -> dict:
        return {
            "epoch": state.epoch,
            "step": self.step,
            "t": state.t,
            "phase": self.phase.value if self.phase is not None else None,
            "rand_draw": self.rand_draw,
            "masked": self.masked,
            "lr": self.lr,
            "peers": [part.as_floats() for part in self.peers],
        }


@dataclass
class TrainRunState:
    curriculum: CurriculumState = field(default_factory=CurriculumState)
    epochs_completed: int = 0
    step: int = 0
    best_epoch: int = -1
    best_score: float = float("-inf")
    dataset_id: str = ""
    recent: Deque[dict] = field(default_factory=lambda: deque(maxlen=HISTORY_SIZE))

    def to_dict(self) -> Dict[str, object]:
        return {
            "epoch": self.curriculum.epoch,
            "total_epochs": self.curriculum.total_epochs,
            "epochs_completed": self.epochs_completed,
            "step": self.step,
            "best_epoch": self.best_epoch,
            "best_score": self.best_score if self.best_epoch >= 0 else None,
            "dataset_id": self.dataset_id,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainRunState":
        best = payload.get("best_score")
        return cls(
            curriculum=CurriculumState(epoch=int(payload["epoch"]), total_epochs=int(payload["total_epochs"])),
            epochs_completed=int(payload["epochs_completed"]),
            step=int(payload["step"]),
            best_epoch=int(payload.get("best_epoch", -1)),
            best_score=float(best) if best is not None else float("-inf"),
            dataset_id=str(payload.get("dataset_id", "")),
        )

"""Joint training of K peers with per-epoch validation and resumable checkpoints."""

from .checkpoint import load_peers, load_run_checkpoint, save_run_checkpoint
from .trainer import (
    TrainingResult,
    WindowDataset,
    build_peers,
    collate_windows,
    run_training,
    select_peer_for_eval,
    training_step,
)
from .types import StepResult, TrainBatch, TrainerConfig, TrainRunState

__all__ = [
    "StepResult",
    "TrainBatch",
    "TrainRunState",
    "TrainerConfig",
    "TrainingResult",
    "WindowDataset",
    "build_peers",
    "collate_windows",
    "load_peers",
    "load_run_checkpoint",
    "run_training",
    "save_run_checkpoint",
    "select_peer_for_eval",
    "training_step",
]

"""Run directories: per-peer encoder weights, optimizer moments and the run-state manifest.

    run_dir/checkpoints/{last,best}/peer_<k>.pt
    run_dir/checkpoints/{last,best}/optim_<k>.pt
    run_dir/checkpoints/{last,best}/state.json
"""

import json
import logging
import re
import shutil
from pathlib import Path
from typing import List, Sequence, Union

import torch

from ..errors import CheckpointError
from ..models.checkpoint import load_encoder, save_encoder
from ..models.encoders import SequenceEncoder
from .types import TrainRunState

_LOG = logging.getLogger("crimedistill.trainer")

_PEER_FILE = re.compile(r"peer_(\d+)\.pt$")


def checkpoint_dir(run_dir: Union[str, Path], which: str = "last") -> Path:
    if which not in ("last", "best"):
        raise CheckpointError(f"unknown checkpoint {which!r}")
    return Path(run_dir) / "checkpoints" / which


def save_run_checkpoint(
    directory: Path,
    models: Sequence[SequenceEncoder],
    optimizers: Sequence[torch.optim.Optimizer],
    schedulers: Sequence[torch.optim.lr_scheduler.LRScheduler],
    run_state: TrainRunState,
) -> Path:
    """Write into a sibling temp directory and swap it in, so a crash never leaves a half checkpoint."""
    staging = directory.with_name(directory.name + ".tmp")
    try:
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        for k, (model, optimizer, scheduler) in enumerate(zip(models, optimizers, schedulers)):
            save_encoder(model, staging / f"peer_{k}.pt")
            torch.save(
                {"optimizer": optimizer.state_dict(), "scheduler": scheduler.state_dict()},
                staging / f"optim_{k}.pt",
            )
        (staging / "state.json").write_text(json.dumps(run_state.to_dict(), indent=2))
        if directory.exists():
            shutil.rmtree(directory)
        staging.rename(directory)
    except OSError as exc:
        raise CheckpointError(f"could not write checkpoint {directory}: {exc}") from exc
    return directory


def load_run_checkpoint(
    directory: Path,
    models: Sequence[SequenceEncoder],
    optimizers: Sequence[torch.optim.Optimizer],
    schedulers: Sequence[torch.optim.lr_scheduler.LRScheduler],
) -> TrainRunState:
    """Restore weights and optimizer moments in place; returns the stored run state."""
    state_path = directory / "state.json"
    if not state_path.exists():
        raise CheckpointError(f"no run state at {directory}")
    for k, (model, optimizer, scheduler) in enumerate(zip(models, optimizers, schedulers)):
        stored = load_encoder(directory / f"peer_{k}.pt")
        if stored.config != model.config:
            raise CheckpointError(f"peer {k} was saved with a different encoder config")
        model.load_state_dict(stored.state_dict())
        try:
            moments = torch.load(directory / f"optim_{k}.pt", map_location="cpu")
        except FileNotFoundError as exc:
            raise CheckpointError(f"optimizer state for peer {k} missing in {directory}") from exc
        optimizer.load_state_dict(moments["optimizer"])
        scheduler.load_state_dict(moments["scheduler"])
    return TrainRunState.from_dict(json.loads(state_path.read_text()))


def load_peers(run_dir: Union[str, Path], which: str = "best", map_location: str = "cpu") -> List[SequenceEncoder]:
    directory = checkpoint_dir(run_dir, which)
    if which == "best" and not directory.exists():
        _LOG.warning("No best checkpoint in %s; falling back to the last one", run_dir)
        directory = checkpoint_dir(run_dir, "last")
    paths = sorted(
        (int(match.group(1)), path)
        for path in directory.glob("peer_*.pt")
        if (match := _PEER_FILE.search(path.name))
    )
    if not paths:
        raise CheckpointError(f"no peer checkpoints under {directory}")
    if [k for k, _ in paths] != list(range(len(paths))):
        raise CheckpointError(f"peer checkpoints under {directory} are not numbered 0..{len(paths) - 1}")
    return [load_encoder(path, map_location=map_location) for _, path in paths]

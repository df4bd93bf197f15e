import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset
from tqdm import tqdm

from ..data.bundle import DatasetBundle
from ..distill.curriculum import draw_curriculum
from ..distill.losses import joint_loss
from ..distill.types import Method
from ..errors import CheckpointError, ConfigError, DataError, NumericError
from ..evaluation.metrics import evaluate
from ..evaluation.types import EvalConfig, RankingMetrics
from ..models.encoders import SequenceEncoder, encode, init_params
from ..models.types import EncoderConfig, SequenceBatch
from .checkpoint import checkpoint_dir, load_run_checkpoint, save_run_checkpoint
from .types import StepResult, TrainBatch, TrainerConfig, TrainRunState

_LOG = logging.getLogger("crimedistill.trainer")

TRAIN_LOG = "train_log.jsonl"
VAL_LOG = "val_log.jsonl"
SELECTION_CUTOFF = 5


class WindowDataset(Dataset):
    """Training samples cut from the windows: (history, next event).

    With `all_positions` every event after the first in a window is a target;
    otherwise only the window's last event is.
    """

    def __init__(self, windows: Sequence[Tuple[np.ndarray, int]], all_positions: bool = True) -> None:
        self.windows = list(windows)
        self.all_positions = all_positions
        counts = [len(inputs) if all_positions else 1 for inputs, _ in self.windows]
        self.offsets = np.concatenate([[0], np.cumsum(counts, dtype=np.int64)])

    def __len__(self) -> int:
        return int(self.offsets[-1])

    def __getitem__(self, index: int) -> Tuple[np.ndarray, int]:
        window = int(np.searchsorted(self.offsets, index, side="right")) - 1
        inputs, target = self.windows[window]
        if not self.all_positions:
            return inputs, target
        position = index - int(self.offsets[window])
        if position == len(inputs) - 1:
            return inputs, target
        return inputs[: position + 1], int(inputs[position + 1])


def collate_windows(samples: List[Tuple[np.ndarray, int]], pad_id: int, mask_id: int, max_len: int) -> TrainBatch:
    longest = max(len(history) for history, _ in samples)
    inputs = SequenceBatch.from_histories(
        [history for history, _ in samples],
        pad_id=pad_id,
        mask_id=mask_id,
        seq_len=min(max_len, longest + 1),
    )
    labels = torch.as_tensor([target for _, target in samples], dtype=torch.long)
    return TrainBatch(inputs=inputs, labels=labels)


def peer_seed(seed: int, peer: int, shared_init: bool = False) -> int:
    key = (0, 0 if shared_init else peer)
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def epoch_seeds(seed: int, epoch: int) -> Tuple[int, int, int]:
    """(shuffle, dropout, curriculum) seeds; a function of the run seed and the epoch only."""
    shuffle, dropout, curriculum = np.random.SeedSequence(seed, spawn_key=(1, epoch)).generate_state(3)
    return int(shuffle), int(dropout), int(curriculum)


def resolve_encoders(config: TrainerConfig, vocab_size: int, max_len: int) -> List[EncoderConfig]:
    base = config.encoders or [EncoderConfig() for _ in range(config.num_peers)]
    return [replace(cfg, vocab_size=vocab_size, max_len=max_len) for cfg in base]


def build_peers(config: TrainerConfig, vocab_size: int, max_len: int) -> List[SequenceEncoder]:
    return [
        init_params(cfg, peer_seed(config.seed, k, config.shared_init)).to(config.device)
        for k, cfg in enumerate(resolve_encoders(config, vocab_size, max_len))
    ]


def linear_decay(total_steps: int):
    return lambda step: max(0.0, 1.0 - step / total_steps)


def build_optimizers(
    models: Sequence[SequenceEncoder],
    config: TrainerConfig,
    total_steps: int,
) -> Tuple[List[torch.optim.Optimizer], List[torch.optim.lr_scheduler.LambdaLR]]:
    optimizers = [torch.optim.Adam(model.parameters(), lr=config.lr) for model in models]
    schedulers = [torch.optim.lr_scheduler.LambdaLR(opt, linear_decay(total_steps)) for opt in optimizers]
    return optimizers, schedulers


def _uses_curriculum(config: TrainerConfig) -> bool:
    distill = config.distill
    return (
        distill.kind is Method.CRIME
        and distill.curriculum
        and config.num_peers > 1
        and not (distill.no_tc and distill.no_nc)
    )


def _dump_batch(dump_dir: Optional[Path], step: int, batch: TrainBatch, logits: Sequence[torch.Tensor]) -> None:
    if dump_dir is None:
        return
    path = dump_dir / f"nonfinite_step{step}.pt"
    torch.save(
        {
            "ids": batch.inputs.ids.cpu(),
            "predict_pos": batch.inputs.predict_pos.cpu(),
            "labels": batch.labels.cpu(),
            "logits": [z.detach().cpu() for z in logits],
        },
        path,
    )
    _LOG.error("Dumped the offending batch to %s", path)


def training_step(
    models: Sequence[SequenceEncoder],
    optimizers: Sequence[torch.optim.Optimizer],
    schedulers: Sequence[torch.optim.lr_scheduler.LambdaLR],
    batch: TrainBatch,
    run_state: TrainRunState,
    config: TrainerConfig,
    frequencies: torch.Tensor,
    generator: Optional[torch.Generator] = None,
    dump_dir: Optional[Path] = None,
) -> StepResult:
    """One joint update: every peer's logits once, one curriculum draw, one optimizer step per peer."""
    for model in models:
        model.train()
    labels = batch.labels
    logits: List[torch.Tensor] = []
    try:
        logits = [encode(batch.inputs, model) for model in models]
        draw = None
        if _uses_curriculum(config):
            draw = draw_curriculum(run_state.curriculum, labels, frequencies, config.distill, generator)
        joint = joint_loss(logits, labels, config.distill, state=run_state.curriculum, draw=draw)
        if not torch.isfinite(joint.total):
            raise NumericError(f"non-finite loss at step {run_state.step}")
    except NumericError:
        _dump_batch(dump_dir, run_state.step, batch, logits)
        raise
    assert joint.draw is draw, "peers must share one curriculum draw per step"

    lr = optimizers[0].param_groups[0]["lr"]
    for optimizer in optimizers:
        optimizer.zero_grad(set_to_none=True)
    joint.total.backward()
    for model, optimizer, scheduler in zip(models, optimizers, schedulers):
        torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
        optimizer.step()
        scheduler.step()

    run_state.step += 1
    return StepResult(
        step=run_state.step,
        phase=draw.phase if draw is not None else None,
        lr=lr,
        peers=list(joint.peers),
        rand_draw=draw.rand_draw if draw is not None else None,
        masked=draw.masked_count if draw is not None else None,
    )


def select_peer_for_eval(num_peers: int, index: int = 0) -> int:
    if not 0 <= index < num_peers:
        raise ConfigError(f"peer index {index} out of range for {num_peers} peers")
    return index


def validate_peers(
    models: Sequence[SequenceEncoder],
    bundle: DatasetBundle,
    device: str = "cpu",
    batch_size: int = 512,
) -> List[RankingMetrics]:
    config = EvalConfig(split="val", batch_size=batch_size)
    return [
        evaluate(model, bundle.split.val_pairs, bundle.split.val_negatives, config, device=device)
        for model in models
    ]


@dataclass
class TrainingResult:
    models: List[SequenceEncoder]
    run_dir: Path
    run_state: TrainRunState
    history: List[dict] = field(default_factory=list)
    val_history: List[dict] = field(default_factory=list)


def run_training(
    bundle: DatasetBundle,
    config: TrainerConfig,
    run_dir: Union[str, Path],
    resume: bool = False,
    stop_after_epoch: Optional[int] = None,
) -> TrainingResult:
    """Train K peers on the bundle's windows, validating and checkpointing every epoch.

    `stop_after_epoch` ends this call early without changing the schedule, so a
    later `resume=True` call continues exactly where an uninterrupted run would be.
    """
    config.validate()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    dataset = WindowDataset(bundle.split.train_windows, config.all_positions)
    if len(dataset) == 0:
        raise DataError("bundle has no training samples")
    steps_per_epoch = math.ceil(len(dataset) / config.batch_size)
    total_steps = steps_per_epoch * config.epochs

    models = build_peers(config, bundle.vocab.size, bundle.max_len)
    optimizers, schedulers = build_optimizers(models, config, total_steps)
    run_state = TrainRunState(dataset_id=bundle.dataset_id)
    run_state.curriculum.total_epochs = config.epochs

    last_dir = checkpoint_dir(run_dir, "last")
    if resume and (last_dir / "state.json").exists():
        run_state = load_run_checkpoint(last_dir, models, optimizers, schedulers)
        if run_state.dataset_id != bundle.dataset_id:
            raise CheckpointError(f"run was trained on dataset {run_state.dataset_id}, not {bundle.dataset_id}")
        if run_state.curriculum.total_epochs != config.epochs:
            raise CheckpointError("cannot resume with a different number of epochs")
        _LOG.info("Resuming %s after epoch %d (step %d)", run_dir, run_state.epochs_completed, run_state.step)
    else:
        if resume:
            _LOG.warning("Nothing to resume in %s; starting from scratch", run_dir)
        for name in (TRAIN_LOG, VAL_LOG):
            (run_dir / name).write_text("")

    frequencies = torch.as_tensor(bundle.vocab.frequency, dtype=torch.float64)
    collate = partial(
        collate_windows,
        pad_id=bundle.vocab.pad_id,
        mask_id=bundle.vocab.mask_id,
        max_len=bundle.max_len,
    )
    result = TrainingResult(models=models, run_dir=run_dir, run_state=run_state)
    last_epoch = config.epochs if stop_after_epoch is None else min(config.epochs, stop_after_epoch)

    _LOG.info(
        "Training %d peer(s) with %s distillation: %d samples, %d steps per epoch, %d epochs",
        len(models),
        config.distill.kind.value,
        len(dataset),
        steps_per_epoch,
        config.epochs,
    )
    for epoch in range(run_state.epochs_completed, last_epoch):
        run_state.curriculum.epoch = epoch
        state = run_state.curriculum
        shuffle_seed, dropout_seed, curriculum_seed = epoch_seeds(config.seed, epoch)
        loader = DataLoader(
            dataset,
            batch_size=config.batch_size,
            shuffle=True,
            generator=torch.Generator().manual_seed(shuffle_seed),
            collate_fn=collate,
        )
        torch.manual_seed(dropout_seed)
        curriculum_generator = torch.Generator().manual_seed(curriculum_seed)

        with (run_dir / TRAIN_LOG).open("a") as log:
            bar = tqdm(loader, desc=f"epoch {epoch + 1}/{config.epochs}", disable=not config.progress, leave=False)
            for batch in bar:
                batch = TrainBatch(inputs=batch.inputs.to(config.device), labels=batch.labels.to(config.device))
                step = training_step(
                    models,
                    optimizers,
                    schedulers,
                    batch,
                    run_state,
                    config,
                    frequencies,
                    generator=curriculum_generator,
                    dump_dir=run_dir,
                )
                record = step.log_record(state)
                log.write(json.dumps(record) + "\n")
                result.history.append(record)
                run_state.recent.append(record)
                bar.set_postfix(loss=f"{sum(p.total.item() for p in step.peers):.4f}")

        run_state.epochs_completed = epoch + 1
        improved = False
        if bundle.split.val_pairs:
            metrics = validate_peers(models, bundle, device=config.device)
            score = float(np.mean([m.ndcg[SELECTION_CUTOFF] for m in metrics]))
            record = {"epoch": epoch, "t": state.t, "score": score, "peers": [m.to_dict() for m in metrics]}
            with (run_dir / VAL_LOG).open("a") as log:
                log.write(json.dumps(record) + "\n")
            result.val_history.append(record)
            if score > run_state.best_score:
                run_state.best_score, run_state.best_epoch = score, epoch
                improved = True
            _LOG.info("Epoch %d/%d (t=%.2f): val NDCG@5 %.4f", epoch + 1, config.epochs, state.t, score)
        else:
            _LOG.info("Epoch %d/%d (t=%.2f) done; no validation pairs", epoch + 1, config.epochs, state.t)

        if improved:
            save_run_checkpoint(checkpoint_dir(run_dir, "best"), models, optimizers, schedulers, run_state)
        save_run_checkpoint(last_dir, models, optimizers, schedulers, run_state)

    return result

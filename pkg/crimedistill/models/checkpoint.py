import logging
from dataclasses import asdict
from pathlib import Path
from typing import Union

import torch

from ..errors import CheckpointError
from .encoders import SequenceEncoder, init_params
from .types import EncoderConfig

_LOG = logging.getLogger("crimedistill.models")

CHECKPOINT_VERSION = 1


def save_encoder(model: SequenceEncoder, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "state_dict": {name: tensor.detach().cpu() for name, tensor in model.state_dict().items()},
    }
    torch.save(payload, path)
    return path


def load_encoder(path: Union[str, Path], map_location: str = "cpu") -> SequenceEncoder:
    path = Path(path)
    try:
        payload = torch.load(path, map_location=map_location)
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc

    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version in {path}")
    config = EncoderConfig(**payload["config"])
    model = init_params(config, seed=0)

    expected = model.state_dict()
    stored = payload["state_dict"]
    missing = sorted(set(expected) - set(stored))
    unexpected = sorted(set(stored) - set(expected))
    if missing or unexpected:
        raise CheckpointError(f"{path}: missing {missing}, unexpected {unexpected}")
    mismatched = [name for name, tensor in stored.items() if tuple(tensor.shape) != tuple(expected[name].shape)]
    if mismatched:
        raise CheckpointError(f"{path}: shape mismatch for {mismatched}")

    dtype = stored["item_embedding.weight"].dtype
    model.to(dtype)
    model.load_state_dict(stored)
    _LOG.debug("Loaded %s encoder from %s", config.kind.value, path)
    return model

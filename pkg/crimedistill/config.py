"""YAML run configuration.

Every section maps onto one of the package dataclasses and starts from its
defaults, so an empty file is a complete config. Unknown sections or keys are
rejected rather than silently ignored.
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar, Union

import yaml

from .data.types import DataConfig, SynthConfig
from .distill.types import DistillConfig
from .errors import ConfigError
from .evaluation.types import EvalConfig
from .models.types import EncoderConfig
from .training.types import TrainerConfig

_LOG = logging.getLogger("crimedistill.config")

RESOLVED_CONFIG = "resolved_config.yaml"
SECTIONS = ("data", "synth", "encoder", "peers", "distill", "trainer", "eval")
# filled in from other sections when the trainer config is assembled
_TRAINER_DERIVED = ("distill", "encoders")

T = TypeVar("T")


def _section(cls: Type[T], payload: Optional[dict], name: str, exclude: tuple = ()) -> T:
    payload = payload or {}
    if not isinstance(payload, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    allowed = {f.name for f in fields(cls)} - set(exclude)
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    return cls(**payload)


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    peers: List[Dict[str, Any]] = field(default_factory=list)  # per-peer encoder overrides
    distill: DistillConfig = field(default_factory=DistillConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    @classmethod
    def from_dict(cls, payload: Optional[dict]) -> "RunConfig":
        payload = payload or {}
        if not isinstance(payload, dict):
            raise ConfigError("config root must be a mapping of sections")
        unknown = sorted(set(payload) - set(SECTIONS) - {"cli"})
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")

        peers = payload.get("peers") or []
        if not isinstance(peers, list):
            raise ConfigError("'peers' must be a list of encoder overrides")
        encoder_keys = {f.name for f in fields(EncoderConfig)}
        for idx, override in enumerate(peers):
            if not isinstance(override, dict):
                raise ConfigError(f"peers[{idx}] must be a mapping")
            bad = sorted(set(override) - encoder_keys)
            if bad:
                raise ConfigError(f"unknown key(s) in peers[{idx}]: {', '.join(bad)}")

        config = cls(
            data=_section(DataConfig, payload.get("data"), "data"),
            synth=_section(SynthConfig, payload.get("synth"), "synth"),
            encoder=_section(EncoderConfig, payload.get("encoder"), "encoder"),
            peers=[dict(override) for override in peers],
            distill=_section(DistillConfig, payload.get("distill"), "distill"),
            trainer=_section(TrainerConfig, payload.get("trainer"), "trainer", exclude=_TRAINER_DERIVED),
            eval=_section(EvalConfig, payload.get("eval"), "eval"),
        )
        config.validate()
        return config

    def validate(self) -> None:
        self.distill.validate()
        self.eval.validate()
        if self.peers and len(self.peers) != self.distill.peers:
            raise ConfigError(f"{len(self.peers)} peer overrides for {self.distill.peers} peers")
        if not 0.0 <= self.data.drop_rate < 1.0:
            raise ConfigError(f"drop_rate must lie in [0, 1), got {self.data.drop_rate}")
        if self.data.max_len < 2:
            raise ConfigError("max_len must be at least 2")
        if self.data.num_negatives < 1:
            raise ConfigError("num_negatives must be positive")
        if self.data.min_events < 3:
            # one training target plus the validation and test events
            raise ConfigError(f"min_events must be at least 3, got {self.data.min_events}")

    def encoder_configs(self) -> List[EncoderConfig]:
        base = replace(self.encoder, max_len=self.data.max_len)
        if not self.peers:
            return [replace(base) for _ in range(self.distill.peers)]
        return [replace(base, **override) for override in self.peers]

    def trainer_config(self) -> TrainerConfig:
        return replace(self.trainer, distill=self.distill, encoders=self.encoder_configs())

    def to_dict(self) -> dict:
        trainer = asdict(self.trainer)
        for name in _TRAINER_DERIVED:
            trainer.pop(name)
        return {
            "data": asdict(self.data),
            "synth": asdict(self.synth),
            "encoder": asdict(self.encoder),
            "peers": [dict(override) for override in self.peers],
            "distill": asdict(self.distill),
            "trainer": trainer,
            "eval": asdict(self.eval),
        }


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    path = Path(path)
    try:
        payload = yaml.safe_load(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    _LOG.debug("Loaded run config from %s", path)
    return RunConfig.from_dict(payload)


def dump_config(config: RunConfig, directory: Union[str, Path], extra: Optional[dict] = None) -> Path:
    """Write the resolved config (plus command-line overrides under `cli`) next to a command's outputs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = config.to_dict()
    if extra:
        payload["cli"] = extra
    path = directory / RESOLVED_CONFIG
    path.write_text(yaml.safe_dump(payload, sort_keys=False))
    return path

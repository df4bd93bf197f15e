from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import torch

from ..errors import ConfigError

LOG_FLOOR = 1e-12
MASK_OFFSET = 1000.0


class Phase(Enum):
    SIMPLE = "simple"
    DIFFICULT = "difficult"


class Method(Enum):
    CRIME = "crime"  # curriculum mutual distillation
    DKD = "dkd"
    DML = "dml"
    NONE = "none"  # independent cross-entropy peers


class KeepSampling(Enum):
    PROPORTIONAL = "proportional"
    RANK = "rank"
    TOPK = "topk"


ABLATIONS = ("no_ctc", "no_tc", "no_cnc", "no_nc")


@dataclass
class DistillConfig:
    alpha: float = 5.0
    beta: float = 1.0
    gamma: float = 1.0
    epsilon: float = 0.01
    tau0: float = 0.2
    tau1: float = 0.7
    peers: int = 2  # K
    method: str = "crime"
    curriculum: bool = True
    temperature: float = 1.0
    keep_sampling: str = "proportional"
    mask_smoothing: float = 1.0
    no_ctc: bool = False
    no_tc: bool = False
    no_cnc: bool = False
    no_nc: bool = False

    @property
    def kind(self) -> Method:
        try:
            return Method(self.method)
        except ValueError as exc:
            raise ConfigError(f"unknown distillation method {self.method!r}") from exc

    @property
    def sampling(self) -> KeepSampling:
        try:
            return KeepSampling(self.keep_sampling)
        except ValueError as exc:
            raise ConfigError(f"unknown keep_sampling {self.keep_sampling!r}") from exc

    @property
    def ablations(self) -> List[str]:
        return [name for name in ABLATIONS if getattr(self, name)]

    def validate(self) -> None:
        kind = self.kind
        self.sampling  # raises on an unknown name
        if not 0.0 < self.tau0 < self.tau1 < 1.0:
            raise ConfigError(f"need 0 < tau0 < tau1 < 1, got tau0={self.tau0}, tau1={self.tau1}")
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ConfigError("alpha, beta and gamma must be non-negative")
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.mask_smoothing < 0:
            raise ConfigError("mask_smoothing must be non-negative")
        minimum = 1 if kind is Method.NONE else 2
        if self.peers < minimum:
            raise ConfigError(f"{kind.value} distillation needs at least {minimum} peers, got {self.peers}")


@dataclass
class CurriculumState:
    epoch: int = 0  # pi, 0-based
    total_epochs: int = 1  # Pi

    @property
    def t(self) -> float:
        return self.epoch / self.total_epochs

    @classmethod
    def at(cls, epoch: int, total_epochs: int) -> "CurriculumState":
        if total_epochs < 1 or not 0 <= epoch <= total_epochs:
            raise ValueError(f"invalid progress {epoch}/{total_epochs}")
        return cls(epoch=epoch, total_epochs=total_epochs)


@dataclass
class DecoupledDistributions:
    p_target: torch.Tensor  # [B]
    p_rest: torch.Tensor  # [B]
    q_nontarget: torch.Tensor  # [B, |I|], zero on target and masked entries


@dataclass
class CurriculumDraw:
    """Per-iteration curriculum decisions shared by every peer."""

    phase: Phase
    rand_draw: float
    mask: torch.Tensor  # [B, |I|] bool, True = masked (target always masked)
    masked_count: int  # masked non-targets per sample

    @property
    def kept_count(self) -> int:
        return self.mask.shape[1] - 1 - self.masked_count


@dataclass
class LossBreakdown:
    ce: torch.Tensor
    tc: torch.Tensor
    nc: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        return self.ce + self.tc + self.nc

    def as_floats(self) -> dict:
        return {"ce": float(self.ce), "tc": float(self.tc), "nc": float(self.nc)}


@dataclass
class JointLoss:
    total: torch.Tensor
    peers: List[LossBreakdown] = field(default_factory=list)
    draw: Optional[CurriculumDraw] = None

"""Curriculum mutual distillation between peer encoders."""

from .curriculum import (
    curriculum_mask,
    draw_curriculum,
    masked_nontarget_count,
    phase_gate,
    truncate_teacher,
    truncation_flags,
)
from .losses import (
    crime_loss_peer,
    decouple_target,
    decoupled,
    dkd_loss,
    dml_loss,
    joint_loss,
    loss_difficult_target,
    loss_nontarget,
    loss_rest_target,
    loss_simple_target,
    nontarget_distribution,
    softmax_probs,
)
from .types import (
    ABLATIONS,
    CurriculumDraw,
    CurriculumState,
    DecoupledDistributions,
    DistillConfig,
    JointLoss,
    KeepSampling,
    LossBreakdown,
    Method,
    Phase,
)

__all__ = [
    "ABLATIONS",
    "CurriculumDraw",
    "CurriculumState",
    "DecoupledDistributions",
    "DistillConfig",
    "JointLoss",
    "KeepSampling",
    "LossBreakdown",
    "Method",
    "Phase",
    "crime_loss_peer",
    "curriculum_mask",
    "decouple_target",
    "decoupled",
    "dkd_loss",
    "dml_loss",
    "draw_curriculum",
    "joint_loss",
    "loss_difficult_target",
    "loss_nontarget",
    "loss_rest_target",
    "loss_simple_target",
    "masked_nontarget_count",
    "nontarget_distribution",
    "phase_gate",
    "softmax_probs",
    "truncate_teacher",
    "truncation_flags",
]

"""Loss mathematics for mutual distillation between peer encoders.

Teacher-side quantities are always detached: a peer acting as teacher receives
no gradient from the loss it supervises.
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F

from ..errors import DegenerateDistributionError, NumericError
from .curriculum import draw_curriculum, truncate_teacher
from .types import (
    LOG_FLOOR,
    MASK_OFFSET,
    CurriculumDraw,
    CurriculumState,
    DecoupledDistributions,
    DistillConfig,
    JointLoss,
    LossBreakdown,
    Method,
    Phase,
)

_LOG = logging.getLogger("crimedistill.distill")

Target = Union[int, Sequence[int], torch.Tensor]


def _check_finite(z: torch.Tensor) -> None:
    if not torch.isfinite(z).all():
        raise NumericError("non-finite logits")


def _batched(z: torch.Tensor, target: Target) -> Tuple[torch.Tensor, torch.Tensor, bool]:
    single = z.dim() == 1
    z2 = z.unsqueeze(0) if single else z
    idx = torch.as_tensor(target, dtype=torch.long, device=z.device).reshape(-1)
    if idx.numel() != z2.shape[0]:
        raise ValueError(f"{idx.numel()} targets for {z2.shape[0]} logit rows")
    if idx.numel() and (idx.min() < 0 or idx.max() >= z2.shape[1]):
        raise IndexError(f"target index outside [0, {z2.shape[1]})")
    return z2, idx, single


def _as_tensor(value, like: Optional[torch.Tensor] = None) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value
    dtype = like.dtype if like is not None else torch.float64
    return torch.as_tensor(value, dtype=dtype)


def _safe_log(p: torch.Tensor) -> torch.Tensor:
    if (p <= 0).any():
        _LOG.warning("Clamping %d non-positive probabilities at %g before log", int((p <= 0).sum()), LOG_FLOOR)
    return p.clamp_min(LOG_FLOOR).log()


def softmax_probs(z: torch.Tensor) -> torch.Tensor:
    _check_finite(z)
    shifted = z - z.amax(dim=-1, keepdim=True)
    return torch.softmax(shifted, dim=-1)


def decouple_target(z: torch.Tensor, target: Target) -> Tuple[torch.Tensor, torch.Tensor]:
    """Binary (target, rest) split of the class distribution."""
    _check_finite(z)
    z2, idx, single = _batched(z, target)
    rows = torch.arange(z2.shape[0], device=z2.device)
    log_norm = torch.logsumexp(z2, dim=-1)
    p_target = (z2[rows, idx] - log_norm).exp()
    others = z2.masked_fill(F.one_hot(idx, z2.shape[1]).bool(), float("-inf"))
    p_rest = (torch.logsumexp(others, dim=-1) - log_norm).exp()
    if single:
        return p_target[0], p_rest[0]
    return p_target, p_rest


def conventional_mask(z: torch.Tensor, target: Target) -> torch.Tensor:
    z2, idx, single = _batched(z, target)
    mask = F.one_hot(idx, z2.shape[1]).bool()
    return mask[0] if single else mask


def nontarget_distribution(z: torch.Tensor, target: Target, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """softmax(z - 1000 * c) restricted to the unmasked non-target entries.

    Masked entries are left out of the normaliser, so they are exactly zero and
    the unmasked entries sum to one even when logits reach magnitude 1e3.
    """
    _check_finite(z)
    z2, idx, single = _batched(z, target)
    if mask is None:
        mask2 = F.one_hot(idx, z2.shape[1]).bool()
    else:
        mask2 = (mask.unsqueeze(0) if mask.dim() == 1 else mask).to(device=z2.device, dtype=torch.bool)
    rows = torch.arange(z2.shape[0], device=z2.device)
    if not mask2[rows, idx].all():
        raise ValueError("mask must cover the target entry")
    if mask2.all(dim=-1).any():
        raise DegenerateDistributionError("every non-target entry is masked")

    shifted = z2 - MASK_OFFSET * mask2.to(z2.dtype)
    q = shifted.masked_fill(mask2, float("-inf")).softmax(dim=-1)
    return q[0] if single else q


def decoupled(z: torch.Tensor, target: Target, mask: Optional[torch.Tensor] = None) -> DecoupledDistributions:
    p_target, p_rest = decouple_target(z, target)
    return DecoupledDistributions(p_target=p_target, p_rest=p_rest, q_nontarget=nontarget_distribution(z, target, mask))


def loss_simple_target(p_teacher_target, p_student_target, alpha: float) -> torch.Tensor:
    p_student = _as_tensor(p_student_target)
    p_teacher = _as_tensor(p_teacher_target, p_student).detach()
    return (-alpha * p_teacher * _safe_log(p_student)).mean()


def loss_difficult_target(p_teacher_target, p_student_target, gamma: float) -> torch.Tensor:
    p_student = _as_tensor(p_student_target)
    p_teacher = _as_tensor(p_teacher_target, p_student).detach()
    weight = (1.0 - p_teacher).clamp_min(0.0) ** gamma
    return (-weight * _safe_log(p_student)).mean()


def loss_rest_target(p_teacher_rest, p_student_rest) -> torch.Tensor:
    """The suppression half of decoupled target distillation: -p~rest * log(prest)."""
    p_student = _as_tensor(p_student_rest)
    p_teacher = _as_tensor(p_teacher_rest, p_student).detach()
    return (-p_teacher * _safe_log(p_student)).mean()


def loss_nontarget(
    q_teacher: torch.Tensor,
    q_student: torch.Tensor,
    beta: float,
    mask: Optional[torch.Tensor] = None,
    target: Optional[Target] = None,
) -> torch.Tensor:
    """beta * cross-entropy between teacher and student over the unmasked non-targets.

    The support is `~mask`, else every class but `target`, else wherever either
    distribution has mass. Student entries that underflowed to zero stay inside it.
    """
    q_student = _as_tensor(q_student)
    q_teacher = _as_tensor(q_teacher, q_student).detach()
    if q_teacher.shape != q_student.shape:
        raise ValueError(f"shape mismatch {tuple(q_teacher.shape)} vs {tuple(q_student.shape)}")
    if mask is not None:
        support = ~mask.to(device=q_student.device, dtype=torch.bool).expand_as(q_student)
    elif target is not None:
        support = ~conventional_mask(q_student, target).expand_as(q_student)
    else:
        support = (q_teacher > 0) | (q_student.detach() > 0)
    if ((q_teacher > 0) & ~support).any():
        raise ValueError("teacher distribution has mass outside the non-target support")

    log_q = torch.where(support, q_student.clamp_min(LOG_FLOOR).log(), torch.zeros_like(q_student))
    if (support & (q_student <= 0)).any():
        _LOG.warning("Clamping non-target probabilities at %g before log", LOG_FLOOR)
    per_sample = -(q_teacher * log_q).sum(dim=-1)
    return beta * per_sample.mean()


def _dkd_terms(
    z_student: torch.Tensor,
    z_teacher: torch.Tensor,
    target: Target,
    temperature: float = 1.0,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-sample (target, non-target) cross-entropies of decoupled KD, computed in log space."""
    _check_finite(z_student)
    _check_finite(z_teacher)
    zs, idx, _ = _batched(z_student / temperature, target)
    zt, _, _ = _batched(z_teacher.detach() / temperature, target)
    rows = torch.arange(zs.shape[0], device=zs.device)
    onehot = F.one_hot(idx, zs.shape[1]).bool()

    def parts(z: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        log_norm = torch.logsumexp(z, dim=-1)
        rest = z.masked_fill(onehot, float("-inf"))
        rest_norm = torch.logsumexp(rest, dim=-1)
        log_q = rest - rest_norm.unsqueeze(-1)
        return z[rows, idx] - log_norm, rest_norm - log_norm, log_q

    s_target, s_rest, s_log_q = parts(zs)
    t_target, t_rest, t_log_q = parts(zt)
    target_term = -(t_target.exp() * s_target + t_rest.exp() * s_rest)
    nontarget_term = -(t_log_q.exp() * s_log_q.masked_fill(onehot, 0.0)).sum(dim=-1)
    return target_term, nontarget_term


def dkd_loss(
    z_student: torch.Tensor,
    z_teacher: torch.Tensor,
    target: Target,
    beta: float,
    temperature: float = 1.0,
) -> torch.Tensor:
    target_term, nontarget_term = _dkd_terms(z_student, z_teacher, target, temperature)
    return (target_term + beta * nontarget_term).mean()


def dml_loss(z_student: torch.Tensor, z_teacher: torch.Tensor, temperature: float = 1.0) -> torch.Tensor:
    """KL(teacher || student) over the full class distribution."""
    _check_finite(z_student)
    log_p = F.log_softmax(z_student / temperature, dim=-1)
    p_teacher = F.softmax(z_teacher.detach() / temperature, dim=-1)
    if log_p.dim() == 1:
        log_p, p_teacher = log_p.unsqueeze(0), p_teacher.unsqueeze(0)
    return F.kl_div(log_p, p_teacher, reduction="batchmean")


def _mean(terms: List[torch.Tensor], like: torch.Tensor) -> torch.Tensor:
    if not terms:
        return like.new_zeros(())
    return torch.stack(terms).mean()


def crime_loss_peer(
    k: int,
    peer_logits: Sequence[torch.Tensor],
    targets: Target,
    config: DistillConfig,
    state: Optional[CurriculumState] = None,
    draw: Optional[CurriculumDraw] = None,
    frequencies: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Target and non-target distillation for peer `k`, averaged over the other peers as teachers.

    Returns (tc, nc). With `config.curriculum` off the target term is the full
    decoupled target cross-entropy and the non-target term uses the
    conventional mask, which makes the result equal to `dkd_loss` for alpha = 1.
    """
    num_peers = len(peer_logits)
    if num_peers < 2:
        raise ValueError(f"distillation needs at least 2 peers, got {num_peers}")
    student_logits = peer_logits[k]
    z_s, idx, _ = _batched(student_logits, targets)
    temperature = config.temperature
    student = z_s / temperature
    teachers = [_batched(z, idx)[0].detach() / temperature for z in peer_logits]

    if config.curriculum and draw is None:
        if frequencies is None:
            raise ValueError("a curriculum draw or a frequency table is required")
        draw = draw_curriculum(state or CurriculumState(), idx, frequencies, config, generator)

    teacher_target = torch.stack([decouple_target(z, idx)[0] for z in teachers])
    if config.curriculum:
        teacher_target = truncate_teacher(teacher_target, config.epsilon)
    p_student, p_student_rest = decouple_target(student, idx)

    phase = Phase.SIMPLE
    if config.curriculum and not config.no_ctc:
        phase = draw.phase

    use_curriculum_mask = config.curriculum and not config.no_cnc
    mask = draw.mask if use_curriculum_mask else conventional_mask(student, idx)
    skip_nc = config.no_nc or (use_curriculum_mask and draw.kept_count == 0)
    q_student = None if skip_nc else nontarget_distribution(student, idx, mask)

    tc_terms: List[torch.Tensor] = []
    nc_terms: List[torch.Tensor] = []
    for j in range(num_peers):
        if j == k:
            continue
        if not config.no_tc:
            if not config.curriculum:
                _, teacher_rest = decouple_target(teachers[j], idx)
                tc_terms.append(
                    loss_simple_target(teacher_target[j], p_student, config.alpha)
                    + loss_rest_target(teacher_rest, p_student_rest)
                )
            elif phase is Phase.SIMPLE:
                tc_terms.append(loss_simple_target(teacher_target[j], p_student, config.alpha))
            else:
                tc_terms.append(loss_difficult_target(teacher_target[j], p_student, config.gamma))
        if not skip_nc:
            q_teacher = nontarget_distribution(teachers[j], idx, mask)
            nc_terms.append(loss_nontarget(q_teacher, q_student, config.beta, mask))

    return _mean(tc_terms, student), _mean(nc_terms, student)


def _baseline_peer(
    k: int,
    peer_logits: Sequence[torch.Tensor],
    targets: torch.Tensor,
    config: DistillConfig,
) -> Tuple[torch.Tensor, torch.Tensor]:
    tc_terms, nc_terms = [], []
    for j, teacher in enumerate(peer_logits):
        if j == k:
            continue
        if config.kind is Method.DKD:
            target_term, nontarget_term = _dkd_terms(peer_logits[k], teacher, targets, config.temperature)
            tc_terms.append(target_term.mean())
            nc_terms.append(config.beta * nontarget_term.mean())
        else:
            tc_terms.append(dml_loss(peer_logits[k], teacher, config.temperature))
    like = peer_logits[k]
    return _mean(tc_terms, like), _mean(nc_terms, like)


def joint_loss(
    peer_logits: Sequence[torch.Tensor],
    labels: torch.Tensor,
    config: DistillConfig,
    state: Optional[CurriculumState] = None,
    draw: Optional[CurriculumDraw] = None,
    frequencies: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
) -> JointLoss:
    """Sum over peers of cross-entropy plus the peer's averaged distillation terms."""
    labels = labels.reshape(-1).long()
    method = config.kind
    distilling = method is not Method.NONE and len(peer_logits) > 1 and not (config.no_tc and config.no_nc)

    if distilling and method is Method.CRIME and config.curriculum and draw is None:
        if frequencies is None:
            raise ValueError("a curriculum draw or a frequency table is required")
        draw = draw_curriculum(state or CurriculumState(), labels, frequencies, config, generator)

    breakdowns: List[LossBreakdown] = []
    for k, logits in enumerate(peer_logits):
        _check_finite(logits)
        ce = F.cross_entropy(logits, labels)
        zero = ce.new_zeros(())
        tc, nc = zero, zero
        if distilling and method is Method.CRIME:
            tc, nc = crime_loss_peer(k, peer_logits, labels, config, state=state, draw=draw)
        elif distilling:
            tc, nc = _baseline_peer(k, peer_logits, labels, config)
        breakdowns.append(LossBreakdown(ce=ce, tc=tc, nc=nc))

    total = torch.stack([part.total for part in breakdowns]).sum()
    return JointLoss(total=total, peers=breakdowns, draw=draw)

import math
from typing import Optional

import torch

from .types import CurriculumDraw, CurriculumState, DistillConfig, KeepSampling, Phase


def phase_gate(t: float, tau0: float, tau1: float, rand_draw: float) -> Phase:
    if t < tau0:
        return Phase.SIMPLE
    if t > tau1:
        return Phase.DIFFICULT
    return Phase.SIMPLE if t < rand_draw else Phase.DIFFICULT


def masked_nontarget_count(t: float, tau1: float, num_classes: int) -> int:
    if t >= tau1:
        return 0
    # half-up rounding of (1 - t) * |I|
    return min(num_classes - 1, int(math.floor((1.0 - t) * num_classes + 0.5)))


def _keep_weights(
    frequencies: torch.Tensor,
    targets: torch.Tensor,
    smoothing: float,
    sampling: KeepSampling,
) -> torch.Tensor:
    freq = frequencies.to(torch.float64)
    if sampling is KeepSampling.RANK:
        order = torch.sort(freq, descending=True, stable=True).indices
        ranks = torch.empty_like(order)
        ranks[order] = torch.arange(1, freq.numel() + 1)
        base = 1.0 / ranks.to(torch.float64)
    else:
        base = freq + smoothing
    # zero-weight classes are still drawable, just after every positive one
    weights = base.clamp_min(1e-12).expand(targets.numel(), -1).clone()
    weights[torch.arange(targets.numel()), targets] = 0.0
    return weights


def curriculum_mask(
    t: float,
    tau1: float,
    targets: torch.Tensor,
    frequencies: torch.Tensor,
    generator: Optional[torch.Generator] = None,
    smoothing: float = 1.0,
    sampling: KeepSampling = KeepSampling.PROPORTIONAL,
) -> torch.Tensor:
    """Per-sample masking vector: True marks the target and the masked non-targets.

    The kept non-targets are drawn without replacement, favouring frequent
    classes, so early training distils over few popular events.
    """
    targets = targets.reshape(-1).cpu()
    num_classes = frequencies.numel()
    batch = targets.numel()
    rows = torch.arange(batch)

    mask = torch.zeros(batch, num_classes, dtype=torch.bool)
    mask[rows, targets] = True
    masked = masked_nontarget_count(t, tau1, num_classes)
    if masked == 0:
        return mask
    keep = num_classes - 1 - masked
    if keep == 0:
        return torch.ones(batch, num_classes, dtype=torch.bool)

    weights = _keep_weights(frequencies.cpu(), targets, smoothing, sampling)
    if sampling is KeepSampling.TOPK:
        kept = torch.sort(weights, dim=1, descending=True, stable=True).indices[:, :keep]
    else:
        kept = torch.multinomial(weights, keep, replacement=False, generator=generator)

    mask = torch.ones(batch, num_classes, dtype=torch.bool)
    mask[rows.unsqueeze(1), kept] = False
    return mask


def truncation_flags(target_probs: torch.Tensor, epsilon: float, batch_size: Optional[int] = None) -> torch.Tensor:
    """Samples every peer ranks in its bottom epsilon share of the batch.

    Ranks are 0-based ascending within the batch with ties broken by sample index.
    """
    probs = target_probs.detach()
    if probs.dim() == 1:
        probs = probs.unsqueeze(0)
    peers, batch = probs.shape
    size = batch if batch_size is None else batch_size
    order = torch.sort(probs, dim=1, stable=True).indices
    ranks = torch.empty_like(order)
    ranks.scatter_(1, order, torch.arange(batch, device=probs.device).expand(peers, batch))
    return (ranks < epsilon * size).all(dim=0)


def truncate_teacher(target_probs: torch.Tensor, epsilon: float, batch_size: Optional[int] = None) -> torch.Tensor:
    """Reset teacher target probabilities to 1 for samples flagged as noise by every peer."""
    flags = truncation_flags(target_probs, epsilon, batch_size)
    return torch.where(flags, torch.ones_like(target_probs), target_probs)


def draw_curriculum(
    state: CurriculumState,
    targets: torch.Tensor,
    frequencies: torch.Tensor,
    config: DistillConfig,
    generator: Optional[torch.Generator] = None,
) -> CurriculumDraw:
    """One phase decision and one mask per sample for the whole iteration."""
    t = state.t
    rand_draw = float(torch.rand(1, generator=generator, dtype=torch.float64))
    phase = phase_gate(t, config.tau0, config.tau1, rand_draw)
    mask = curriculum_mask(
        t,
        config.tau1,
        targets,
        frequencies,
        generator=generator,
        smoothing=config.mask_smoothing,
        sampling=config.sampling,
    )
    return CurriculumDraw(
        phase=phase,
        rand_draw=rand_draw,
        mask=mask.to(targets.device),
        masked_count=masked_nontarget_count(t, config.tau1, frequencies.numel()),
    )

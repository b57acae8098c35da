from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import torch

from ..numerics import DTYPE
from ..rasterizer import opacity_expected
from ..scene import quaternion_to_rotation
from .state import TrainState

logger = logging.getLogger(__name__)

SPLIT_FACTOR = 1.6
SPLIT_SAMPLES = 2
RESET_OPACITY = 0.01


@dataclass
class DensifyReport:
    cloned: int
    split: int
    pruned: int
    count: int
    """Gaussian count after the pass."""


def _cap(candidates: torch.Tensor, grads: torch.Tensor, budget: int) -> torch.Tensor:
    """Keep at most `budget` candidates, the ones with the largest gradients."""
    chosen = int(candidates.sum())
    if chosen <= budget:
        return candidates
    capped = torch.zeros_like(candidates)
    if budget <= 0:
        return capped
    scores = torch.where(candidates, grads, torch.full_like(grads, -math.inf))
    capped[torch.topk(scores, budget, sorted=False).indices] = True
    return capped


def inference_opacity(state: TrainState) -> torch.Tensor:
    """Per-gaussian opacity the variant renders with at inference."""
    mu = state.cloud.mu.detach()
    if state.flags.stochastic_opacity:
        return opacity_expected(mu, state.cloud.sigma.detach())
    return torch.sigmoid(mu)


def densify_and_prune(state: TrainState) -> DensifyReport:
    """Clone small and split large gaussians with high screen-space gradient,
    then prune transparent ones.

    Gradients are the accumulated NDC-space mean gradient norms divided by
    the number of times each gaussian was visible. Pruning compares the
    inference-mode opacity with `prune_opacity`. Statistics are reset
    afterwards.
    """
    config = state.config
    grads = state.grad_accum / state.denom.clamp_min(1.0)
    grads = torch.where(state.denom > 0, grads, torch.zeros_like(grads))
    n = len(state.cloud)
    high = grads >= config.densify_grad_threshold

    with torch.no_grad():
        scales = torch.exp(state.cloud.s.detach()).max(dim=1).values
        small = scales <= config.percent_dense * state.extent
        budget = max(config.max_gaussians - n, 0)
        clone_mask = _cap(high & small, grads, budget)
        budget -= int(clone_mask.sum())
        split_mask = _cap(high & ~small, grads, budget // SPLIT_SAMPLES)

        tensors = {name: t.detach() for name, t in state.cloud.tensors().items()}
        clones = {name: t[clone_mask].clone() for name, t in tensors.items()}

        splits: dict[str, torch.Tensor] = {}
        split_count = int(split_mask.sum())
        if split_count:
            std = torch.exp(tensors["s"][split_mask]).repeat(SPLIT_SAMPLES, 1)
            samples = torch.randn(std.shape, generator=state.generator, dtype=DTYPE) * std
            rotation = quaternion_to_rotation(tensors["q"][split_mask]).repeat(SPLIT_SAMPLES, 1, 1)
            for name, tensor in tensors.items():
                splits[name] = tensor[split_mask].repeat(SPLIT_SAMPLES, *([1] * (tensor.dim() - 1)))
            splits["X"] = torch.bmm(rotation, samples.unsqueeze(-1)).squeeze(-1) + splits["X"]
            splits["s"] = torch.log(std / SPLIT_FACTOR)

    extension = {
        name: torch.cat([clones[name], splits[name]], dim=0) if split_count else clones[name] for name in clones
    }
    added = extension["X"].shape[0]
    if added:
        state.extend(extension)

    with torch.no_grad():
        cloud = state.cloud
        prune_mask = torch.cat([split_mask, torch.zeros(added, dtype=torch.bool)])
        prune_mask |= inference_opacity(state) < config.prune_opacity
    pruned = int(prune_mask.sum())
    if pruned:
        state.prune(~prune_mask)
    state.reset_densification_stats()

    report = DensifyReport(
        cloned=int(clone_mask.sum()),
        split=split_count,
        pruned=pruned - split_count,
        count=len(state.cloud),
    )
    logger.info(
        "densify at iteration %d: %d cloned, %d split, %d pruned, %d gaussians",
        state.iteration,
        report.cloned,
        report.split,
        report.pruned,
        report.count,
    )
    return report


def reset_opacity(state: TrainState, ceiling: float = RESET_OPACITY) -> None:
    """Clamp every S(mu) to at most `ceiling`; sigma parameters are untouched."""
    with torch.no_grad():
        mu = state.cloud.mu.detach()
        limit = math.log(ceiling / (1.0 - ceiling))
        reset = torch.minimum(mu, torch.full_like(mu, limit))
    state.replace_tensor("mu", reset)
    logger.info("reset opacity of %d gaussians at iteration %d", len(state.cloud), state.iteration)


def should_reset_opacity(state: TrainState) -> bool:
    config = state.config
    step = state.iteration
    return state.flags.opacity_reset and 0 < step <= config.densify_until and step % config.opacity_reset_interval == 0


def should_densify(state: TrainState) -> bool:
    config = state.config
    step = state.iteration
    return config.densify_from < step <= config.densify_until and step % config.densify_interval == 0

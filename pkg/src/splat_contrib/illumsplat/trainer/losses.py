from __future__ import annotations

import torch

from ..errors import ShapeError
from ..scene import GaussianCloud
from ..synthbench.metrics import ssim_tensor


def reconstruction_loss(rendered: torch.Tensor, target: torch.Tensor, dssim_weight: float = 0.2) -> torch.Tensor:
    """(1 - w) * L1 + w * (1 - SSIM) / 2."""
    if rendered.shape != target.shape:
        raise ShapeError(f"rendered {tuple(rendered.shape)} and target {tuple(target.shape)} differ")
    l1 = (rendered - target).abs().mean()
    if dssim_weight == 0.0:
        return l1
    dssim = (1.0 - ssim_tensor(rendered, target)) / 2.0
    return (1.0 - dssim_weight) * l1 + dssim_weight * dssim


def uncertainty_reg_loss(cloud: GaussianCloud, sign: float = -1.0) -> torch.Tensor:
    """sign * sum_i |sigma_i|; sigma is a softplus so |sigma_i| = sigma_i."""
    return sign * cloud.sigma.sum()

from __future__ import annotations

import math

import torch
import torch.nn.functional as F

from ..errors import ShapeError
from ..numerics import DTYPE

PSNR_IDENTICAL = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _check_pair(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dim() != 3 or a.shape[-1] != 3:
        raise ShapeError(f"expected (H, W, 3) images, got {tuple(a.shape)}")


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> torch.Tensor:
    gauss = torch.tensor([math.exp(-((x - size // 2) ** 2) / (2.0 * sigma**2)) for x in range(size)], dtype=DTYPE)
    gauss = gauss / gauss.sum()
    return torch.outer(gauss, gauss)


def ssim_map(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Per-pixel, per-channel SSIM of two (H, W, 3) images, zero padded."""
    _check_pair(a, b)
    img1 = a.permute(2, 0, 1).unsqueeze(0).to(DTYPE)
    img2 = b.permute(2, 0, 1).unsqueeze(0).to(DTYPE)
    window = gaussian_window().expand(3, 1, SSIM_WINDOW, SSIM_WINDOW).contiguous()
    pad = SSIM_WINDOW // 2

    mu1 = F.conv2d(img1, window, padding=pad, groups=3)
    mu2 = F.conv2d(img2, window, padding=pad, groups=3)
    mu1_sq, mu2_sq, mu1_mu2 = mu1 * mu1, mu2 * mu2, mu1 * mu2
    sigma1_sq = F.conv2d(img1 * img1, window, padding=pad, groups=3) - mu1_sq
    sigma2_sq = F.conv2d(img2 * img2, window, padding=pad, groups=3) - mu2_sq
    sigma12 = F.conv2d(img1 * img2, window, padding=pad, groups=3) - mu1_mu2

    numerator = (2.0 * mu1_mu2 + SSIM_C1) * (2.0 * sigma12 + SSIM_C2)
    denominator = (mu1_sq + mu2_sq + SSIM_C1) * (sigma1_sq + sigma2_sq + SSIM_C2)
    return numerator / denominator


def ssim_tensor(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean SSIM as a differentiable 0-d tensor."""
    return ssim_map(a, b).mean()


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    if torch.equal(a, b):
        return 1.0
    with torch.no_grad():
        return float(ssim_tensor(a, b))


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    """PSNR in dB for images in [0, 1]; identical images give 99.0."""
    _check_pair(a, b)
    with torch.no_grad():
        mse = float(((a.to(DTYPE) - b.to(DTYPE)) ** 2).mean())
    if mse == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(1.0 / mse)

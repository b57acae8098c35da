from __future__ import annotations

import torch

from .internal import make_generator
from .numerics import DTYPE, sh_coeff_count
from .scene import Camera, GaussianCloud, intrinsics, look_at
from .synthbench import SynthConfig, SynthDataset, make_default_dataset
from .trainer import TrainConfig


def make_cloud(
    count: int,
    seed: int = 0,
    sh_degree: int = 1,
    embed_dim: int = 4,
    extent: float = 0.6,
) -> GaussianCloud:
    """Create a random gaussian cloud for testing.

    Args:
        count: Number of gaussians.
        seed: Seed of the random draws.
        sh_degree: SH degree of the colors.
        embed_dim: Size of the per-gaussian embedding.
        extent: Side of the cube around the origin holding the centers.

    Returns:
        A cloud whose gaussians are visible from `make_camera()`.
    """
    if not isinstance(count, int):  # pyright: ignore[reportUnnecessaryIsInstance]
        raise TypeError(f"count must be an int, not {type(count).__name__}")
    if not isinstance(seed, int):  # pyright: ignore[reportUnnecessaryIsInstance]
        raise TypeError(f"seed must be an int, not {type(seed).__name__}")
    g = make_generator(seed, 0x7E57)
    q = torch.randn((count, 4), generator=g, dtype=DTYPE)
    return GaussianCloud(
        X=(torch.rand((count, 3), generator=g, dtype=DTYPE) - 0.5) * extent,
        q=q / q.norm(dim=-1, keepdim=True),
        s=torch.log(0.05 + 0.1 * torch.rand((count, 3), generator=g, dtype=DTYPE)),
        mu=2.0 * torch.rand(count, generator=g, dtype=DTYPE) - 0.5,
        sigma_u=torch.rand(count, generator=g, dtype=DTYPE) - 1.0,
        sh=0.3 * torch.randn((count, sh_coeff_count(sh_degree)), generator=g, dtype=DTYPE),
        e=0.1 * torch.randn((count, embed_dim), generator=g, dtype=DTYPE),
    )


def make_camera(width: int = 16, height: int = 16, distance: float = 3.0, focal: float | None = None) -> Camera:
    """Create a camera on the -y axis looking at the origin, z up.

    Args:
        width: Image width in pixels.
        height: Image height in pixels.
        distance: Distance of the camera center from the origin.
        focal: Focal length in pixels, 1.6 * width by default.
    """
    if not isinstance(width, int) or not isinstance(height, int):  # pyright: ignore[reportUnnecessaryIsInstance]
        raise TypeError("width and height must be ints")
    f = 1.6 * width if focal is None else focal
    W = look_at((0.0, -distance, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    return Camera(intrinsics(width, height, f), W, width, height)


def make_tiny_dataset(
    seed: int = 0,
    views: int = 6,
    test_views: int = 2,
    styles: int = 2,
    size: int = 16,
    gaussians: int = 40,
) -> SynthDataset:
    """Create a small synthetic dataset that renders in milliseconds.

    Args:
        seed: Dataset seed.
        views: Number of training views.
        test_views: Number of held-out views.
        styles: Number of styles besides the identity.
        size: Image side in pixels, a multiple of 8.
        gaussians: Ground-truth gaussian count.
    """
    if not isinstance(size, int) or size % 8:  # pyright: ignore[reportUnnecessaryIsInstance]
        raise TypeError(f"size must be an int multiple of 8, got {size!r}")
    config = SynthConfig(
        seed=seed,
        gaussians=gaussians,
        views=views,
        test_views=test_views,
        styles=styles,
        width=size,
        height=size,
        clean_images=2,
        sh_degree=1,
    )
    return make_default_dataset(config)


def make_tiny_config(variant: str = "M6", iterations: int = 5, styles: int = 2, **overrides: object) -> TrainConfig:
    """Create a training config matching `make_tiny_dataset` with small networks.

    Args:
        variant: Ablation variant name.
        iterations: Training iterations.
        styles: Number of styles besides the identity.
        overrides: Any other TrainConfig field.
    """
    if not isinstance(variant, str):  # pyright: ignore[reportUnnecessaryIsInstance]
        raise TypeError(f"variant must be a string, not {type(variant).__name__}")
    values: dict[str, object] = {
        "variant": variant,
        "iterations": iterations,
        "styles": styles,
        "sh_degree": 1,
        "embed_dim": 4,
        "latent_channels": 4,
        "latent_height": 2,
        "latent_width": 2,
        "feature_channels": 4,
        "pe_bands": 2,
        "init_gaussians": 30,
        "queue_capacity": 8,
        "log_interval": 1,
        "densify_from": 2,
        "densify_interval": 2,
        "densify_until": 4,
        "max_gaussians": 60,
    }
    values.update(overrides)
    return TrainConfig.from_mapping(values, strict=True).validate()


class CorruptGradient:
    """Gradient hook scaling the analytic gradient of one parameter.

    Passed as `corrupt` to `run_gradcheck` to prove the check fails and
    names the broken parameter.
    """

    def __init__(self, parameter: str, factor: float = 1.5) -> None:
        if not isinstance(parameter, str):  # pyright: ignore[reportUnnecessaryIsInstance]
            raise TypeError(f"parameter must be a string, not {type(parameter).__name__}")
        self.parameter = parameter
        self.factor = factor
        self.calls = 0

    def __call__(self, name: str, grad: torch.Tensor) -> torch.Tensor:
        if name != self.parameter:
            return grad
        self.calls += 1
        return grad * self.factor

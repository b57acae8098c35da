from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ValidationError
from ..internal import derive_seed
from ..numerics import DTYPE, SH_C0, logit, sh_coeff_count
from ..rasterizer import DeterministicMean, render
from ..scene import Camera, GaussianCloud, orbit_cameras

logger = logging.getLogger(__name__)

ORBIT_RADIUS = 2.5
ORBIT_HEIGHT = 0.8
TEST_HEIGHT = 0.6
FOCAL_PER_WIDTH = 2.0
MIN_COVERAGE = 0.5
COVERAGE_ALPHA = 0.1


@dataclass
class SceneSpec:
    count: int = 200
    extent: float = 1.0
    """Side of the cube positions are drawn from."""
    scale_min: float = 0.03
    scale_max: float = 0.1
    sh_degree: int = 3
    embed_dim: int = 8


def random_cloud(spec: SceneSpec, seed: int) -> GaussianCloud:
    """Draw a cloud: uniform positions, log-uniform scales, DC colors only."""
    if spec.count < 1:
        raise ValidationError(f"gaussian count must be >= 1, got {spec.count}")
    rng = np.random.default_rng(seed)
    n = spec.count
    half = spec.extent / 2.0
    X = rng.uniform(-half, half, size=(n, 3))
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    s = rng.uniform(math.log(spec.scale_min * spec.extent), math.log(spec.scale_max * spec.extent), size=(n, 3))
    rgb = rng.uniform(0.1, 0.9, size=(n, 3))
    opacity = rng.uniform(0.5, 0.95, size=n)
    sh = np.zeros((n, sh_coeff_count(spec.sh_degree)))
    sh[:, :3] = (rgb - 0.5) / SH_C0
    return GaussianCloud(
        X=torch.from_numpy(X),
        q=torch.from_numpy(q),
        s=torch.from_numpy(s),
        mu=torch.tensor([logit(float(o)) for o in opacity], dtype=DTYPE),
        sigma_u=torch.full((n,), -20.0, dtype=DTYPE),
        sh=torch.from_numpy(sh),
        e=torch.zeros((n, spec.embed_dim), dtype=DTYPE),
    )


def coverage(cloud: GaussianCloud, cameras: list[Camera]) -> float:
    """Mean fraction of pixels with alpha > 0.1 over `cameras`."""
    fractions = []
    with torch.no_grad():
        for cam in cameras:
            alpha = render(cloud, cam, mode=DeterministicMean()).alpha
            fractions.append(float((alpha > COVERAGE_ALPHA).to(DTYPE).mean()))
    return sum(fractions) / len(fractions)


def make_scene(spec: SceneSpec, seed: int, ring: list[Camera] | None = None, max_attempts: int = 8) -> GaussianCloud:
    """Random ground-truth scene covering at least half of the ring's pixels.

    Each failed attempt redraws with a new derived seed and 25% larger
    scales.
    """
    if ring is None:
        ring = orbit_cameras(8, ORBIT_RADIUS, ORBIT_HEIGHT, 32, 32, FOCAL_PER_WIDTH * 32)
    attempt_spec = SceneSpec(**vars(spec))
    for attempt in range(max_attempts):
        cloud = random_cloud(attempt_spec, derive_seed(seed, attempt))
        covered = coverage(cloud, ring)
        if covered >= MIN_COVERAGE:
            logger.debug("scene attempt %d covers %.1f%% of the ring", attempt, 100 * covered)
            return cloud
        logger.debug("scene attempt %d covers only %.1f%%, redrawing", attempt, 100 * covered)
        attempt_spec.scale_min *= 1.25
        attempt_spec.scale_max *= 1.25
    raise ValidationError(f"could not reach {MIN_COVERAGE:.0%} coverage after {max_attempts} attempts")


def train_cameras(views: int, width: int, height: int) -> list[Camera]:
    return orbit_cameras(views, ORBIT_RADIUS, ORBIT_HEIGHT, width, height, FOCAL_PER_WIDTH * width)


def test_cameras(views: int, width: int, height: int, train_views: int) -> list[Camera]:
    """Held-out ring at a lower height, offset half a step from the train ring."""
    phase = math.pi / max(train_views, 1)
    return orbit_cameras(views, ORBIT_RADIUS, TEST_HEIGHT, width, height, FOCAL_PER_WIDTH * width, phase=phase)

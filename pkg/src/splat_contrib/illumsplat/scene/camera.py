"""Pinhole camera and EWA projection of gaussians.

Camera space follows the OpenCV convention: x to the right, y down, z
forward. Pixel (row i, column j) has its center at image coordinates
(x=j, y=i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import torch

from ..errors import CulledBehindCamera, ShapeError, ValidationError
from ..numerics import DTYPE
from .gaussians import GaussianPrimitive, build_covariance

Z_NEAR = 0.01
LOW_PASS = 0.3

Vector = Union[Sequence[float], torch.Tensor]


@dataclass
class Camera:
    K: torch.Tensor
    """3x3 intrinsics, upper triangular."""
    W: torch.Tensor
    """4x4 world-to-camera rigid transform."""
    width: int
    height: int

    def __post_init__(self) -> None:
        self.K = torch.as_tensor(self.K, dtype=DTYPE)
        W = torch.as_tensor(self.W, dtype=DTYPE)
        if tuple(W.shape) == (3, 4):
            W = torch.cat([W, torch.tensor([[0.0, 0.0, 0.0, 1.0]], dtype=DTYPE)])
        self.W = W
        if tuple(self.K.shape) != (3, 3):
            raise ShapeError(f"K must be 3x3, got {tuple(self.K.shape)}")
        if tuple(self.W.shape) != (4, 4):
            raise ShapeError(f"W must be 4x4 or 3x4, got {tuple(self.W.shape)}")
        self.width = int(self.width)
        self.height = int(self.height)

    @property
    def rotation(self) -> torch.Tensor:
        return self.W[:3, :3]

    @property
    def translation(self) -> torch.Tensor:
        return self.W[:3, 3]

    @property
    def P(self) -> torch.Tensor:
        """Projection matrix K W (3x4)."""
        return self.K @ self.W[:3, :]

    @property
    def center(self) -> torch.Tensor:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def validate(self, tol: float = 1e-9) -> None:
        """Check the intrinsics and the rigidity of W.

        Raises:
            ValidationError: when K is not upper triangular with positive
                focal lengths, or the rotation block is not a proper rotation.
        """
        K = self.K
        if K[1, 0] != 0 or K[2, 0] != 0 or K[2, 1] != 0 or K[2, 2] != 1:
            raise ValidationError("K must be upper triangular with K[2,2] = 1")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValidationError("K focal lengths must be positive")
        R = self.rotation
        error = float((R @ R.T - torch.eye(3, dtype=DTYPE)).abs().max())
        if error > tol:
            raise ValidationError(f"rotation block is not orthonormal (error {error:.3e} > {tol:g})")
        det = float(torch.linalg.det(R))
        if det < 0:
            raise ValidationError(f"rotation block has determinant {det:.6f}, expected +1")
        if tuple(self.W[3].tolist()) != (0.0, 0.0, 0.0, 1.0):
            raise ValidationError("last row of W must be (0, 0, 0, 1)")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"invalid image size {self.width}x{self.height}")


@dataclass
class Projection:
    """Screen-space footprint of a batch of gaussians."""

    mean2d: torch.Tensor
    """(N, 2) pixel coordinates (x, y)."""
    cov2d: torch.Tensor
    """(N, 2, 2) covariance including the low-pass floor."""
    depth: torch.Tensor
    """(N,) view-space z."""
    valid: torch.Tensor
    """(N,) depth > Z_NEAR."""


@dataclass
class ProjectedGaussian:
    mean2d: torch.Tensor
    cov2d: torch.Tensor
    depth: float


def to_camera(X: torch.Tensor, cam: Camera) -> torch.Tensor:
    return X @ cam.rotation.T + cam.translation


def project_points(X: torch.Tensor, cam: Camera) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Perspective projection of world points.

    Returns (uv, depth, valid). Points at or behind Z_NEAR get a finite dummy
    coordinate and `valid = False`.
    """
    Xc = to_camera(X, cam)
    depth = Xc[:, 2]
    valid = depth > Z_NEAR
    z = torch.where(valid, depth, torch.ones_like(depth))
    projected = Xc @ cam.K.T
    uv = projected[:, :2] / z.unsqueeze(-1)
    return uv, depth, valid


def project_gaussians(X: torch.Tensor, cov3d: torch.Tensor, cam: Camera) -> Projection:
    """EWA projection J W_r Sigma W_r^T J^T + 0.3 I of a batch of gaussians."""
    Xc = to_camera(X, cam)
    depth = Xc[:, 2]
    valid = depth > Z_NEAR
    z = torch.where(valid, depth, torch.ones_like(depth))
    x, y = Xc[:, 0], Xc[:, 1]
    K = cam.K
    inv_z = 1.0 / z
    inv_z2 = inv_z * inv_z

    mean2d = torch.stack(
        [
            K[0, 0] * x * inv_z + K[0, 1] * y * inv_z + K[0, 2],
            K[1, 1] * y * inv_z + K[1, 2],
        ],
        dim=-1,
    )

    zeros = torch.zeros_like(z)
    row0 = torch.stack([K[0, 0] * inv_z, K[0, 1] * inv_z, -(K[0, 0] * x + K[0, 1] * y) * inv_z2], dim=-1)
    row1 = torch.stack([zeros, K[1, 1] * inv_z, -K[1, 1] * y * inv_z2], dim=-1)
    J = torch.stack([row0, row1], dim=-2)
    M = J @ cam.rotation
    cov2d = M @ cov3d @ M.transpose(-1, -2)
    cov2d = 0.5 * (cov2d + cov2d.transpose(-1, -2)) + LOW_PASS * torch.eye(2, dtype=DTYPE)
    return Projection(mean2d=mean2d, cov2d=cov2d, depth=depth, valid=valid)


def project_gaussian(g: GaussianPrimitive, cam: Camera) -> ProjectedGaussian:
    """Project one gaussian.

    Raises:
        CulledBehindCamera: when the view-space depth is at or behind Z_NEAR.
    """
    X = torch.tensor([g.X], dtype=DTYPE)
    cov3d = build_covariance(torch.tensor([g.q], dtype=DTYPE), torch.tensor([g.s], dtype=DTYPE))
    projection = project_gaussians(X, cov3d, cam)
    depth = float(projection.depth[0])
    if not bool(projection.valid[0]):
        raise CulledBehindCamera(depth, Z_NEAR)
    return ProjectedGaussian(mean2d=projection.mean2d[0], cov2d=projection.cov2d[0], depth=depth)


def intrinsics(width: int, height: int, focal: float) -> torch.Tensor:
    """K with square pixels and the principal point at the image center."""
    return torch.tensor(
        [
            [focal, 0.0, (width - 1) / 2.0],
            [0.0, focal, (height - 1) / 2.0],
            [0.0, 0.0, 1.0],
        ],
        dtype=DTYPE,
    )


def look_at(eye: Vector, target: Vector, up: Vector) -> torch.Tensor:
    """World-to-camera transform for a camera at `eye` looking at `target`."""
    eye = torch.as_tensor(eye, dtype=DTYPE)
    target = torch.as_tensor(target, dtype=DTYPE)
    up = torch.as_tensor(up, dtype=DTYPE)
    forward = target - eye
    forward = forward / forward.norm()
    right = torch.linalg.cross(forward, up)
    norm = right.norm()
    if float(norm) < 1e-12:
        raise ValidationError("look_at: up vector is parallel to the viewing direction")
    right = right / norm
    down = torch.linalg.cross(forward, right)
    R = torch.stack([right, down, forward])
    W = torch.eye(4, dtype=DTYPE)
    W[:3, :3] = R
    W[:3, 3] = -R @ eye
    return W


def orbit_cameras(
    count: int,
    radius: float,
    height: float,
    width_px: int,
    height_px: int,
    focal: float,
    phase: float = 0.0,
    target: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> list[Camera]:
    """Cameras evenly spaced on a horizontal circle around `target` (z up)."""
    K = intrinsics(width_px, height_px, focal)
    up = torch.tensor([0.0, 0.0, 1.0], dtype=DTYPE)
    center = torch.tensor(target, dtype=DTYPE)
    cameras = []
    for index in range(count):
        theta = phase + 2.0 * math.pi * index / count
        eye = center + torch.tensor([radius * math.cos(theta), radius * math.sin(theta), height], dtype=DTYPE)
        cameras.append(Camera(K=K.clone(), W=look_at(eye, center, up), width=width_px, height=height_px))
    return cameras

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import torch
import torch.nn.functional as F

from ..errors import ShapeError
from ..numerics import DTYPE, sh_coeff_count, sh_degree_for

LOG_SCALE_MIN = -16.11809565095832  # ln(1e-7)
LOG_SCALE_MAX = 6.907755278982137  # ln(1e3)
DEFAULT_EMBED_DIM = 8

PARAMETER_NAMES = ("X", "q", "s", "mu", "sigma_u", "sh", "e")
"""Names of the per-gaussian parameter tensors, in scene file record order."""


@dataclass
class GaussianPrimitive:
    """A single gaussian, as plain Python floats."""

    X: tuple[float, float, float]
    """World position."""
    q: tuple[float, float, float, float]
    """Unit quaternion (w, x, y, z)."""
    s: tuple[float, float, float]
    """Log-scale per axis."""
    mu: float
    """Mean of the opacity distribution (logit domain)."""
    sigma_u: float
    """Pre-activation of the opacity std-dev, sigma = softplus(sigma_u)."""
    sh: tuple[float, ...]
    """SH coefficients, 3 * (D + 1) ** 2 floats."""
    e: tuple[float, ...] = field(default_factory=lambda: (0.0,) * DEFAULT_EMBED_DIM)
    """Learnable embedding."""

    @property
    def sigma(self) -> float:
        return float(F.softplus(torch.tensor(self.sigma_u, dtype=DTYPE)))


@dataclass
class GaussianCloud:
    """Structure-of-arrays storage for N gaussians.

    Every tensor has N rows and is float64. The tensors may be leaves of the
    autograd graph (training) or plain tensors (files, tests).
    """

    X: torch.Tensor
    q: torch.Tensor
    s: torch.Tensor
    mu: torch.Tensor
    sigma_u: torch.Tensor
    sh: torch.Tensor
    e: torch.Tensor

    def __post_init__(self) -> None:
        n = self.X.shape[0]
        expected = {
            "X": (n, 3),
            "q": (n, 4),
            "s": (n, 3),
            "mu": (n,),
            "sigma_u": (n,),
        }
        for name, shape in expected.items():
            tensor = getattr(self, name)
            if tuple(tensor.shape) != shape:
                raise ShapeError(f"{name} must have shape {shape}, got {tuple(tensor.shape)}")
        if self.sh.dim() != 2 or self.sh.shape[0] != n:
            raise ShapeError(f"sh must have shape (N, 3*(D+1)^2), got {tuple(self.sh.shape)}")
        sh_degree_for(self.sh.shape[1])
        if self.e.dim() != 2 or self.e.shape[0] != n:
            raise ShapeError(f"e must have shape (N, E), got {tuple(self.e.shape)}")

    @classmethod
    def empty(cls, sh_degree: int = 3, embed_dim: int = DEFAULT_EMBED_DIM) -> GaussianCloud:
        return cls.zeros(0, sh_degree, embed_dim)

    @classmethod
    def zeros(cls, n: int, sh_degree: int = 3, embed_dim: int = DEFAULT_EMBED_DIM) -> GaussianCloud:
        q = torch.zeros((n, 4), dtype=DTYPE)
        q[:, 0] = 1.0
        return cls(
            X=torch.zeros((n, 3), dtype=DTYPE),
            q=q,
            s=torch.zeros((n, 3), dtype=DTYPE),
            mu=torch.zeros((n,), dtype=DTYPE),
            sigma_u=torch.zeros((n,), dtype=DTYPE),
            sh=torch.zeros((n, sh_coeff_count(sh_degree)), dtype=DTYPE),
            e=torch.zeros((n, embed_dim), dtype=DTYPE),
        )

    @classmethod
    def from_primitives(cls, primitives: list[GaussianPrimitive], sh_degree: int = 3, embed_dim: int = DEFAULT_EMBED_DIM) -> GaussianCloud:
        if not primitives:
            return cls.empty(sh_degree, embed_dim)
        return cls(
            X=torch.tensor([p.X for p in primitives], dtype=DTYPE),
            q=torch.tensor([p.q for p in primitives], dtype=DTYPE),
            s=torch.tensor([p.s for p in primitives], dtype=DTYPE),
            mu=torch.tensor([p.mu for p in primitives], dtype=DTYPE),
            sigma_u=torch.tensor([p.sigma_u for p in primitives], dtype=DTYPE),
            sh=torch.tensor([p.sh for p in primitives], dtype=DTYPE),
            e=torch.tensor([p.e for p in primitives], dtype=DTYPE),
        )

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def __getitem__(self, index: int) -> GaussianPrimitive:
        def row(tensor: torch.Tensor) -> tuple[float, ...]:
            return tuple(float(v) for v in tensor[index].detach())

        return GaussianPrimitive(
            X=row(self.X),  # type: ignore[arg-type]
            q=row(self.q),  # type: ignore[arg-type]
            s=row(self.s),  # type: ignore[arg-type]
            mu=float(self.mu[index]),
            sigma_u=float(self.sigma_u[index]),
            sh=row(self.sh),
            e=row(self.e),
        )

    def __iter__(self) -> Iterator[GaussianPrimitive]:
        for index in range(len(self)):
            yield self[index]

    @property
    def sh_degree(self) -> int:
        return sh_degree_for(int(self.sh.shape[1]))

    @property
    def embed_dim(self) -> int:
        return int(self.e.shape[1])

    @property
    def sigma(self) -> torch.Tensor:
        """Opacity std-dev, always >= 0."""
        return F.softplus(self.sigma_u)

    def tensors(self) -> dict[str, torch.Tensor]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def detached(self) -> GaussianCloud:
        """Copy with every tensor detached and cloned."""
        return GaussianCloud(**{name: t.detach().clone() for name, t in self.tensors().items()})

    def select(self, mask: torch.Tensor) -> GaussianCloud:
        return GaussianCloud(**{name: t[mask] for name, t in self.tensors().items()})

    def covariances(self) -> torch.Tensor:
        return build_covariance(self.q, self.s)


def quaternion_to_rotation(q: torch.Tensor) -> torch.Tensor:
    """Rotation matrices from quaternions (w, x, y, z), shape (..., 4) -> (..., 3, 3).

    The quaternion is normalised first so slightly off-unit inputs still give
    an orthonormal matrix.
    """
    q = q / q.norm(dim=-1, keepdim=True)
    w, x, y, z = q.unbind(-1)
    rows = [
        torch.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], dim=-1),
        torch.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], dim=-1),
        torch.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], dim=-1),
    ]
    return torch.stack(rows, dim=-2)


def build_covariance(q: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
    """World covariance R S S^T R^T with S = diag(exp(s)).

    Works on a single primitive ((4,), (3,)) or a batch ((N, 4), (N, 3)).
    """
    if q.shape[-1] != 4 or s.shape[-1] != 3:
        raise ShapeError(f"expected quaternion (...,4) and log-scale (...,3), got {tuple(q.shape)} and {tuple(s.shape)}")
    rotation = quaternion_to_rotation(q)
    m = rotation * torch.exp(s).unsqueeze(-2)
    cov = m @ m.transpose(-1, -2)
    return 0.5 * (cov + cov.transpose(-1, -2))


def normalize_quaternions_(q: torch.Tensor) -> None:
    """Renormalize quaternions in place (no gradient is recorded)."""
    with torch.no_grad():
        q.div_(q.norm(dim=-1, keepdim=True))


def clamp_log_scales_(s: torch.Tensor) -> None:
    with torch.no_grad():
        s.clamp_(LOG_SCALE_MIN, LOG_SCALE_MAX)

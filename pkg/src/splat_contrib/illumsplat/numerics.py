"""Dense float64 tensor math, the reverse-mode tape and shared kernels.

Tensors are `torch.Tensor` in float64. The tape is torch's define-by-run
autograd graph: it is rebuilt by every forward pass and consumed by
`Tape.backward`, which returns gradients for the registered leaves in
registration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping

import torch

from .errors import NumericDomainError, ShapeError

DTYPE = torch.float64

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.4453057213202769,
    -0.5900435899266435,
)
MAX_SH_DEGREE = 3


def sigmoid(x: float) -> float:
    """Logistic function 1 / (1 + e^-x) on a scalar.

    Saturates without overflow on both sides.
    """
    if not math.isfinite(x):
        raise NumericDomainError("sigmoid input", x)
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def sigmoid_grad(x: float) -> float:
    """Derivative S(x) (1 - S(x))."""
    s = sigmoid(x)
    return s * (1.0 - s)


def logit(p: float) -> float:
    """Inverse of `sigmoid` for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise NumericDomainError("logit input", p)
    return math.log(p / (1.0 - p))


def softplus_inverse(y: torch.Tensor) -> torch.Tensor:
    """Inverse of softplus for y > 0."""
    return y + torch.log(-torch.expm1(-y))


def sh_coeff_count(degree: int) -> int:
    """Number of floats holding the SH coefficients of one RGB primitive."""
    if not 0 <= degree <= MAX_SH_DEGREE:
        raise ShapeError(f"SH degree must be in [0, {MAX_SH_DEGREE}], got {degree}")
    return 3 * (degree + 1) ** 2


def sh_degree_for(count: int) -> int:
    """Recover the SH degree from a coefficient count."""
    for degree in range(MAX_SH_DEGREE + 1):
        if sh_coeff_count(degree) == count:
            return degree
    raise ShapeError(f"{count} is not a valid SH coefficient count (3*(D+1)^2, D<=3)")


def sh_evaluate(direction: torch.Tensor, coeffs: torch.Tensor) -> torch.Tensor:
    """Evaluate real spherical harmonics for RGB coefficients.

    Args:
        direction: unit directions, shape (..., 3).
        coeffs: flattened coefficients, shape (..., 3 * (D + 1) ** 2), laid
            out band-major: coefficient k of channel c sits at `3 * k + c`.

    Returns:
        Colors of shape (..., 3). No offset and no clamping is applied.
    """
    if direction.shape[-1] != 3:
        raise ShapeError(f"direction must end with 3 components, got {tuple(direction.shape)}")
    degree = sh_degree_for(coeffs.shape[-1])
    sh = coeffs.reshape(*coeffs.shape[:-1], (degree + 1) ** 2, 3)
    result = SH_C0 * sh[..., 0, :]
    if degree < 1:
        return result

    x, y, z = direction[..., 0:1], direction[..., 1:2], direction[..., 2:3]
    result = result - SH_C1 * y * sh[..., 1, :] + SH_C1 * z * sh[..., 2, :] - SH_C1 * x * sh[..., 3, :]
    if degree < 2:
        return result

    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    result = (
        result
        + SH_C2[0] * xy * sh[..., 4, :]
        + SH_C2[1] * yz * sh[..., 5, :]
        + SH_C2[2] * (2.0 * zz - xx - yy) * sh[..., 6, :]
        + SH_C2[3] * xz * sh[..., 7, :]
        + SH_C2[4] * (xx - yy) * sh[..., 8, :]
    )
    if degree < 3:
        return result

    return (
        result
        + SH_C3[0] * y * (3.0 * xx - yy) * sh[..., 9, :]
        + SH_C3[1] * xy * z * sh[..., 10, :]
        + SH_C3[2] * y * (4.0 * zz - xx - yy) * sh[..., 11, :]
        + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh[..., 12, :]
        + SH_C3[4] * x * (4.0 * zz - xx - yy) * sh[..., 13, :]
        + SH_C3[5] * z * (xx - yy) * sh[..., 14, :]
        + SH_C3[6] * x * (xx - 3.0 * yy) * sh[..., 15, :]
    )


def ensure_finite(what: str, tensor: torch.Tensor) -> torch.Tensor:
    """Return `tensor` unchanged, raising `NumericDomainError` on NaN/Inf."""
    if not bool(torch.isfinite(tensor).all()):
        raise NumericDomainError(what)
    return tensor


def backward(loss: torch.Tensor, leaves: Mapping[str, torch.Tensor], retain_graph: bool = False) -> dict[str, torch.Tensor]:
    """Reverse pass from a scalar loss to named leaves.

    Leaves the loss does not depend on receive an all-zero gradient.
    """
    if loss.numel() != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    ensure_finite("loss", loss.detach())
    names = list(leaves)
    tensors = [leaves[name] for name in names]
    wanted = [t for t in tensors if t.requires_grad]
    grads = torch.autograd.grad(loss.reshape(()), wanted, allow_unused=True, retain_graph=retain_graph) if wanted else ()
    by_id = {id(t): g for t, g in zip(wanted, grads)}
    result: dict[str, torch.Tensor] = {}
    for name, tensor in zip(names, tensors):
        grad = by_id.get(id(tensor))
        result[name] = torch.zeros_like(tensor) if grad is None else grad
    return result


class Tape:
    """Ordered registry of named leaf tensors.

    The recorded graph itself lives in torch autograd; this class fixes the
    leaf order so gradient dictionaries always come back in the same order.
    """

    def __init__(self, leaves: Mapping[str, torch.Tensor] | None = None) -> None:
        self._leaves: dict[str, torch.Tensor] = {}
        for name, tensor in (leaves or {}).items():
            self.register(name, tensor)

    def register(self, name: str, tensor: torch.Tensor) -> torch.Tensor:
        if name in self._leaves:
            raise KeyError(f"leaf already registered: {name}")
        if tensor.dtype != DTYPE:
            raise ShapeError(f"leaf {name} must be float64, got {tensor.dtype}")
        if not tensor.requires_grad:
            tensor.requires_grad_(True)
        self._leaves[name] = tensor
        return tensor

    def leaves(self) -> dict[str, torch.Tensor]:
        return dict(self._leaves)

    def __iter__(self) -> Iterator[str]:
        return iter(self._leaves)

    def __len__(self) -> int:
        return len(self._leaves)

    def backward(self, loss: torch.Tensor, retain_graph: bool = False) -> dict[str, torch.Tensor]:
        return backward(loss, self._leaves, retain_graph=retain_graph)


@dataclass
class GradientComparison:
    """Outcome of comparing an analytic gradient with finite differences."""

    name: str
    max_abs_error: float
    max_rel_error: float
    checked: int
    passed: bool


def finite_difference(
    fn: Callable[[], torch.Tensor],
    tensor: torch.Tensor,
    indices: Iterable[int] | None = None,
    step: float = 1e-5,
) -> torch.Tensor:
    """Central finite differences of scalar `fn()` w.r.t. entries of `tensor`.

    `tensor` is perturbed in place (under `no_grad`) and restored. Entries not
    listed in `indices` are left at zero.
    """
    result = torch.zeros_like(tensor, dtype=DTYPE)
    flat = tensor.data.view(-1)
    out = result.view(-1)
    targets = range(flat.numel()) if indices is None else indices
    with torch.no_grad():
        for index in targets:
            original = flat[index].item()
            flat[index] = original + step
            plus = float(fn())
            flat[index] = original - step
            minus = float(fn())
            flat[index] = original
            out[index] = (plus - minus) / (2.0 * step)
    return result


def compare_gradients(
    name: str,
    analytic: torch.Tensor,
    numeric: torch.Tensor,
    indices: Iterable[int] | None = None,
    rtol: float = 1e-3,
    atol: float = 1e-8,
) -> GradientComparison:
    """Compare gradients entry-wise with |a - n| <= atol + rtol * |n|."""
    a = analytic.detach().reshape(-1).to(DTYPE)
    n = numeric.detach().reshape(-1).to(DTYPE)
    if indices is not None:
        picked = torch.as_tensor(list(indices), dtype=torch.long)
        a, n = a[picked], n[picked]
    if a.numel() == 0:
        return GradientComparison(name, 0.0, 0.0, 0, True)
    abs_err = (a - n).abs()
    rel_err = abs_err / n.abs().clamp_min(atol)
    passed = bool((abs_err <= atol + rtol * n.abs()).all())
    return GradientComparison(name, float(abs_err.max()), float(rel_err.max()), int(a.numel()), passed)

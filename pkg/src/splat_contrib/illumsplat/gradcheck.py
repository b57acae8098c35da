"""Finite-difference checks of every gradient pathway.

Three suites run on a 5-gaussian 16x16 scene:

- ``opacity``: stochastic and expected opacity w.r.t. mu and sigma, and the
  identity (d alpha / d sigma) / (d alpha / d mu) = eps.
- ``rasterizer``: X, q, s, mu, sigma_u and SH coefficients through `render`
  in every render mode (fixed eps for the stochastic mode).
- ``field``: embeddings and the encoder, decoder, color MLP and generator
  weights through the full neural-field render.

Analytic gradients come from torch autograd; numeric ones from central
differences with step 1e-5. An entry passes when
|analytic - numeric| <= 1e-8 + 1e-3 * |numeric|.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import torch

from .errors import GradientCheckError, ValidationError
from .illumination import FieldNetworks, NetworkShape, encode, evaluate_field, generate_latent, sample_noise
from .internal import make_generator
from .numerics import DTYPE, GradientComparison, Tape, backward, compare_gradients, finite_difference, sh_coeff_count
from .rasterizer import (
    DeterministicMean,
    InferenceExpected,
    RenderMode,
    TrainStochastic,
    opacity_expected,
    opacity_train,
    render,
    render_backward,
)
from .scene import Camera, GaussianCloud, orbit_cameras

logger = logging.getLogger(__name__)

SUITES = ("opacity", "rasterizer", "field")
CASES = ("all",) + SUITES

STEP = 1e-5
RTOL = 1e-3
ATOL = 1e-8
RATIO_TOL = 1e-10

SCENE_SIZE = 16
SCENE_GAUSSIANS = 5
SCENE_SH_DEGREE = 1
WEIGHT_SAMPLES = 6

Corruption = Callable[[str, torch.Tensor], torch.Tensor]
"""Hook applied to each analytic gradient before comparison, by parameter name."""


@dataclass
class GradCheckReport:
    seed: int
    cases: str
    results: list[GradientComparison] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def failures(self) -> list[GradientComparison]:
        return [result for result in self.results if not result.passed]

    def as_dict(self) -> dict[str, object]:
        return {
            "seed": self.seed,
            "cases": self.cases,
            "passed": self.passed,
            "checks": [
                {
                    "name": r.name,
                    "passed": r.passed,
                    "checked": r.checked,
                    "max_abs_error": r.max_abs_error,
                    "max_rel_error": r.max_rel_error,
                }
                for r in self.results
            ],
        }


def _identity(name: str, grad: torch.Tensor) -> torch.Tensor:
    return grad


def gradcheck_camera() -> Camera:
    return orbit_cameras(1, 3.0, 0.5, SCENE_SIZE, SCENE_SIZE, 1.6 * SCENE_SIZE)[0]


def gradcheck_scene(seed: int, embed_dim: int = 4) -> GaussianCloud:
    """Five well separated, partly overlapping gaussians in front of the check camera.

    Opacities stay below the 0.99 clamp and scales keep every footprint a
    few pixels wide, so the render is smooth in every parameter.
    """
    g = make_generator(seed, 0x6C)
    n = SCENE_GAUSSIANS

    def uniform(low: float, high: float, *shape: int) -> torch.Tensor:
        return low + (high - low) * torch.rand(shape, generator=g, dtype=DTYPE)

    q = torch.randn((n, 4), generator=g, dtype=DTYPE)
    return GaussianCloud(
        X=uniform(-0.35, 0.35, n, 3),
        q=q / q.norm(dim=-1, keepdim=True),
        s=torch.log(uniform(0.08, 0.18, n, 3)),
        mu=uniform(-1.0, 1.0, n),
        sigma_u=uniform(-1.0, 0.5, n),
        sh=0.4 * torch.randn((n, sh_coeff_count(SCENE_SH_DEGREE)), generator=g, dtype=DTYPE),
        e=0.5 * torch.randn((n, embed_dim), generator=g, dtype=DTYPE),
    )


def _upstream(seed: int, cam: Camera) -> torch.Tensor:
    return torch.rand((cam.height, cam.width, 3), generator=make_generator(seed, 0x75), dtype=DTYPE)


def _modes(seed: int) -> list[RenderMode]:
    eps = torch.randn(SCENE_GAUSSIANS, generator=make_generator(seed, 0xE5), dtype=DTYPE)
    return [DeterministicMean(), InferenceExpected(), TrainStochastic(seed, eps=eps)]


def _check(
    name: str,
    label: str,
    analytic: torch.Tensor,
    fn: Callable[[], torch.Tensor],
    tensor: torch.Tensor,
    corrupt: Corruption,
    indices: Iterable[int] | None = None,
) -> GradientComparison:
    picked = None if indices is None else list(indices)
    numeric = finite_difference(fn, tensor, picked, STEP)
    result = compare_gradients(label, corrupt(name, analytic), numeric, picked, RTOL, ATOL)
    logger.debug("%s: %d entries, max abs error %.3e", label, result.checked, result.max_abs_error)
    return result


def check_opacity(seed: int = 0, corrupt: Corruption = _identity) -> list[GradientComparison]:
    g = make_generator(seed, 0x0A)
    count = 16
    tape = Tape()
    mu = tape.register("mu", 4.0 * torch.rand(count, generator=g, dtype=DTYPE) - 2.0)
    sigma = tape.register("sigma", 2.0 * torch.rand(count, generator=g, dtype=DTYPE))
    eps = torch.randn(count, generator=g, dtype=DTYPE)
    results = []

    def train_loss() -> torch.Tensor:
        return opacity_train(mu, sigma, eps).sum()  # type: ignore[union-attr]

    grads = tape.backward(train_loss())
    for name in ("mu", "sigma"):
        results.append(_check(name, f"opacity:train:{name}", grads[name], train_loss, tape.leaves()[name], corrupt))

    ratio = corrupt("sigma", grads["sigma"]) / corrupt("mu", grads["mu"])
    error = (ratio - eps).abs()
    results.append(
        GradientComparison(
            "opacity:train:ratio",
            float(error.max()),
            float((error / eps.abs().clamp_min(ATOL)).max()),
            count,
            bool((error <= RATIO_TOL).all()),
        )
    )

    def expected_loss() -> torch.Tensor:
        return opacity_expected(mu, sigma).sum()  # type: ignore[union-attr]

    grads = tape.backward(expected_loss())
    for name in ("mu", "sigma"):
        results.append(_check(name, f"opacity:expected:{name}", grads[name], expected_loss, tape.leaves()[name], corrupt))
    return results


def check_rasterizer(seed: int = 0, corrupt: Corruption = _identity) -> list[GradientComparison]:
    cam = gradcheck_camera()
    cloud = gradcheck_scene(seed)
    for tensor in cloud.tensors().values():
        tensor.requires_grad_(True)
    upstream = _upstream(seed, cam)
    results = []
    for mode in _modes(seed):
        label = type(mode).__name__

        def loss() -> torch.Tensor:
            return (render(cloud, cam, mode=mode).color * upstream).sum()

        grads = render_backward(cloud, cam, mode, upstream, render(cloud, cam, mode=mode))
        leaves = {name: cloud.tensors()[name] for name in ("X", "q", "s", "mu", "sigma_u")}
        leaves["sh"] = cloud.sh
        grads["sh"] = grads.pop("colors")
        for name, tensor in leaves.items():
            results.append(_check(name, f"rasterizer:{label}:{name}", grads[name], loss, tensor, corrupt))
    return results


def _field_shape(embed_dim: int) -> NetworkShape:
    return NetworkShape(
        latent_channels=4,
        latent_height=2,
        latent_width=2,
        feature_channels=4,
        embed_dim=embed_dim,
        sh_coeffs=sh_coeff_count(SCENE_SH_DEGREE),
        pe_bands=2,
        hidden=8,
        generator_channels=4,
    )


def check_field(seed: int = 0, corrupt: Corruption = _identity) -> list[GradientComparison]:
    """Gradients through latent, decoder, feature sampling, color MLP and render.

    A sample of entries is checked per weight tensor; every embedding entry
    is checked.
    """
    cam = gradcheck_camera()
    cloud = gradcheck_scene(seed)
    cloud.e.requires_grad_(True)
    networks = FieldNetworks(_field_shape(cloud.embed_dim), seed=seed, zero_residual=False)
    image = torch.rand((cam.height, cam.width, 3), generator=make_generator(seed, 0x1A), dtype=DTYPE)
    noise = sample_noise(networks, make_generator(seed, 0x2B))
    upstream = _upstream(seed, cam)
    mode = InferenceExpected()
    picker = make_generator(seed, 0x3C)

    def encoded_loss() -> torch.Tensor:
        colors = evaluate_field(networks, cloud, encode(networks, image), cam)
        return (render(cloud, cam, colors, mode).color * upstream).sum()

    def generated_loss() -> torch.Tensor:
        colors = evaluate_field(networks, cloud, generate_latent(networks, noise), cam)
        return (render(cloud, cam, colors, mode).color * upstream).sum()

    results = []
    tape = Tape({"e": cloud.e})
    grads = tape.backward(encoded_loss())
    results.append(_check("e", "field:e", grads["e"], encoded_loss, cloud.e, corrupt))

    for prefix, fn in (
        ("encoder", encoded_loss),
        ("decoder", encoded_loss),
        ("color_mlp", encoded_loss),
        ("generator", generated_loss),
    ):
        weights = {name: p for name, p in networks.named_parameters() if name.startswith(prefix + ".")}
        analytic = backward(fn(), weights)
        for name, parameter in weights.items():
            count = parameter.numel()
            indices = torch.randperm(count, generator=picker)[: min(WEIGHT_SAMPLES, count)].tolist()
            results.append(_check(name, f"field:{name}", analytic[name], fn, parameter, corrupt, indices))
    return results


def run_gradcheck(seed: int = 0, cases: str = "all", corrupt: Corruption | None = None) -> GradCheckReport:
    """Run the selected suites and collect every comparison.

    Raises:
        ValidationError: for an unknown `cases` value.
    """
    if cases not in CASES:
        raise ValidationError(f"unknown gradient check case {cases!r}, expected one of {', '.join(CASES)}")
    hook = corrupt or _identity
    suites = {"opacity": check_opacity, "rasterizer": check_rasterizer, "field": check_field}
    report = GradCheckReport(seed, cases)
    for name in SUITES:
        if cases in ("all", name):
            results = suites[name](seed, hook)
            report.results.extend(results)
            logger.info("%s: %d/%d checks passed", name, sum(r.passed for r in results), len(results))
    return report


def ensure_passed(report: GradCheckReport) -> GradCheckReport:
    """Raise for the first failed comparison."""
    failures = report.failures()
    if failures:
        first = failures[0]
        raise GradientCheckError(first.name, first.max_abs_error, first.max_rel_error)
    return report

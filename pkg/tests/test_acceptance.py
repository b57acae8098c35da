"""End-to-end checks on the full-size oracles and desk-scale training runs. Run with `pytest -m slow`."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch

from splat_contrib.illumsplat.gradcheck import ensure_passed, run_gradcheck
from splat_contrib.illumsplat.illumination import FieldEvaluator
from splat_contrib.illumsplat.internal import make_generator, tensor_digest
from splat_contrib.illumsplat.numerics import DTYPE
from splat_contrib.illumsplat.rasterizer import (
    DeterministicMean,
    InferenceExpected,
    TrainStochastic,
    opacity_expected,
    render,
    render_reference,
)
from splat_contrib.illumsplat.synthbench import SynthConfig, SynthDataset, make_default_dataset
from splat_contrib.illumsplat.testing import make_camera, make_cloud, make_tiny_config
from splat_contrib.illumsplat.trainer import (
    TrainConfig,
    TrainResult,
    TrainState,
    appearance,
    latent_from_image,
    latent_from_seed,
    render_view,
    run_training,
)

pytestmark = pytest.mark.slow


def test_expected_opacity_matches_monte_carlo() -> None:
    eps = torch.randn(1_000_000, generator=make_generator(0, 1), dtype=DTYPE)
    for mu in range(-6, 7):
        for sigma in np.arange(0.0, 3.01, 0.5):
            mc = float(torch.sigmoid(mu + float(sigma) * eps).mean())
            assert abs(opacity_expected(float(mu), float(sigma)) - mc) <= 0.012, (mu, sigma)


def test_gradient_check_all_suites() -> None:
    report = ensure_passed(run_gradcheck(seed=0))
    names = {r.name.rsplit(":", 1)[-1] for r in report.results}
    assert {"X", "q", "s", "mu", "sigma_u", "sh", "e", "ratio"} <= names


def test_rasterizer_matches_reference_on_random_scenes() -> None:
    cam = make_camera(16, 16)
    for seed in range(50):
        count = 1 + seed % 30
        cloud = make_cloud(count, seed=seed)
        eps = torch.randn(count, generator=make_generator(seed, 2), dtype=DTYPE)
        for mode in (DeterministicMean(), InferenceExpected(), TrainStochastic(seed=seed, eps=eps)):
            fast = render(cloud, cam, mode=mode).color.detach().numpy()
            slow = render_reference(cloud, cam, mode=mode)
            np.testing.assert_allclose(fast, slow, atol=2e-3, rtol=0.0, err_msg=f"seed {seed} {type(mode).__name__}")


def test_view_shared_colors(tiny_dataset: SynthDataset) -> None:
    result = run_training(make_tiny_config(iterations=3), tiny_dataset, progress=False)
    state = result.state
    latent = latent_from_seed(state, 11)
    evaluator = FieldEvaluator(state.networks)
    digests = set()
    for cam in tiny_dataset.cameras:
        colors = appearance(state, latent, tiny_dataset.cameras[0], evaluator)
        assert colors is not None
        digests.add(tensor_digest(colors.coeffs))
        render_view(state, cam, colors)
    assert len(digests) == 1
    assert evaluator.evaluations == 1


def test_training_is_deterministic(tmp_path: Path, tiny_dataset: SynthDataset) -> None:
    config = make_tiny_config(iterations=6)
    first = run_training(config, tiny_dataset, tmp_path / "a", progress=False).checkpoint
    second = run_training(config, tiny_dataset, tmp_path / "b", progress=False).checkpoint
    assert first is not None and second is not None
    files = sorted(p.name for p in first.iterdir())
    assert files == sorted(p.name for p in second.iterdir())
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


@pytest.fixture(scope="module")
def default_dataset() -> SynthDataset:
    return make_default_dataset(SynthConfig())


@pytest.fixture(scope="module")
def default_run(default_dataset: SynthDataset) -> TrainResult:
    return run_training(TrainConfig(variant="M6"), default_dataset, progress=False)


def test_default_run_converges(default_run: TrainResult) -> None:
    mean = default_run.evaluation[-1]
    assert (mean.view, mean.style) == ("mean", "all")
    assert mean.psnr >= 25.0
    assert mean.ssim >= 0.80
    assert default_run.elapsed_seconds < 30 * 60


def unit_latents(state: TrainState, dataset: SynthDataset, style: int) -> torch.Tensor:
    rows = [latent_from_image(state, dataset.image(view, style), style).z.reshape(-1) for view in dataset.views("test")]
    return torch.nn.functional.normalize(torch.stack(rows), dim=-1)


def mean_offdiagonal(similarity: torch.Tensor) -> float:
    n = similarity.shape[0]
    return float((similarity.sum() - similarity.diagonal().sum()) / (n * (n - 1)))


def test_held_out_latents_separate_by_style(default_run: TrainResult, default_dataset: SynthDataset) -> None:
    state = default_run.state
    latents = [unit_latents(state, default_dataset, style) for style in range(default_dataset.style_count)]
    same = np.mean([mean_offdiagonal(z @ z.T) for z in latents])
    cross = np.mean(
        [float((latents[i] @ latents[j].T).mean()) for i in range(len(latents)) for j in range(len(latents)) if i != j]
    )
    clean = torch.stack(state.bank.clean_pool)
    to_clean = np.mean([float((z @ clean.T).mean()) for z in latents])
    assert same - cross >= 0.1
    assert same > to_clean


def test_full_model_beats_ablations() -> None:
    scores: dict[str, list[float]] = {"M1": [], "M5": [], "M6": []}
    for seed in range(3):
        dataset = make_default_dataset(SynthConfig(seed=seed, gaussians=100, views=12, width=32, height=32, sh_degree=1))
        for variant in scores:
            config = TrainConfig(
                variant=variant,
                seed=seed,
                iterations=1000,
                sh_degree=1,
                init_gaussians=150,
                densify_from=200,
                densify_until=600,
                opacity_reset_interval=200,
            )
            scores[variant].append(run_training(config, dataset, progress=False).evaluation[-1].psnr)
    means = {variant: float(np.mean(values)) for variant, values in scores.items()}
    assert means["M6"] >= means["M5"], means
    assert means["M6"] >= means["M1"], means

from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from splat_contrib.illumsplat.errors import ContractError, ShapeError
from splat_contrib.illumsplat.numerics import DTYPE, SH_C0, sigmoid
from splat_contrib.illumsplat.rasterizer import (
    PROBIT_SCALE,
    DeterministicMean,
    InferenceExpected,
    RGBColors,
    SHColors,
    TrainStochastic,
    footprint_radius2,
    opacity_expected,
    opacity_train,
    render,
    render_backward,
    render_image,
    render_reference,
)
from splat_contrib.illumsplat.scene import Camera, GaussianCloud
from splat_contrib.illumsplat.testing import make_camera, make_cloud


def single_gaussian(mu: float = 0.0, sigma_u: float = -30.0) -> GaussianCloud:
    cloud = GaussianCloud.zeros(1, sh_degree=0, embed_dim=2)
    cloud.s.fill_(math.log(0.05))
    cloud.mu.fill_(mu)
    cloud.sigma_u.fill_(sigma_u)
    return cloud


def with_grad(cloud: GaussianCloud) -> GaussianCloud:
    return GaussianCloud(**{name: t.clone().requires_grad_(True) for name, t in cloud.tensors().items()})


class TestOpacity:
    def test_train_at_zero_noise_is_sigmoid(self) -> None:
        assert opacity_train(0.0, 1.0, 0.0) == 0.5
        assert opacity_train(1.5, 2.0, 0.0) == sigmoid(1.5)

    def test_train_uses_reparameterization(self) -> None:
        assert opacity_train(0.5, 2.0, -0.25) == sigmoid(0.0)

    def test_expected_without_uncertainty_is_sigmoid(self) -> None:
        assert opacity_expected(2.0, 0.0) == sigmoid(2.0)

    def test_expected_shrinks_towards_one_half(self) -> None:
        value = opacity_expected(2.0, 1.0)
        assert value == pytest.approx(sigmoid(2.0 / math.sqrt(1.0 + PROBIT_SCALE)), abs=1e-15)
        assert 0.5 < value < sigmoid(2.0)
        assert opacity_expected(0.0, 5.0) == 0.5

    def test_expected_matches_monte_carlo(self) -> None:
        g = torch.Generator().manual_seed(0)
        eps = torch.randn(400_000, generator=g, dtype=DTYPE)
        mc = float(torch.sigmoid(1.0 + 0.8 * eps).mean())
        assert opacity_expected(1.0, 0.8) == pytest.approx(mc, abs=1e-2)

    def test_tensor_inputs(self) -> None:
        mu = torch.tensor([0.0, 1.0], dtype=DTYPE)
        out = opacity_expected(mu, torch.zeros(2, dtype=DTYPE))
        assert torch.allclose(out, torch.sigmoid(mu), atol=0.0)

    def test_scale_beats_printed_constant_at_wide_sigma(self) -> None:
        nodes, weights = np.polynomial.hermite_e.hermegauss(200)
        mu, sigma = -5.0, 3.0
        exact = float(np.sum(weights / (1.0 + np.exp(-(mu + sigma * nodes)))) / math.sqrt(2.0 * math.pi))
        printed = sigmoid(mu / math.sqrt(1.0 + math.pi**2 * sigma**2 / 8.0))
        assert abs(opacity_expected(mu, sigma) - exact) <= 0.01
        assert abs(printed - exact) > 0.1

    def test_footprint_radius(self) -> None:
        radius2 = footprint_radius2(torch.tensor([1.0, 0.01], dtype=DTYPE))
        assert float(radius2[0]) == pytest.approx(2.0 * math.log(255.0))
        assert float(radius2[1]) == 9.0

    def test_footprint_widens_past_three_sigma(self) -> None:
        knee = math.exp(4.5) / 255.0
        radius2 = footprint_radius2(torch.tensor([knee * 0.99, knee * 1.5, 0.99], dtype=DTYPE))
        assert float(radius2[0]) == 9.0
        assert float(radius2[1]) == pytest.approx(9.0 + 2.0 * math.log(1.5), abs=1e-12)
        # the weight at the cutoff is exactly the skip threshold
        assert 0.99 * math.exp(-float(radius2[2]) / 2.0) == pytest.approx(1.0 / 255.0, abs=1e-15)


class TestRender:
    def test_empty_scene_is_background(self, camera: Camera) -> None:
        out = render(GaussianCloud.empty(sh_degree=1, embed_dim=4), camera, background=(0.2, 0.4, 0.6))
        assert out.color.shape == (16, 16, 3)
        assert torch.allclose(out.color, torch.tensor([0.2, 0.4, 0.6], dtype=DTYPE).expand(16, 16, 3))
        assert float(out.alpha.abs().max()) == 0.0
        assert int(out.contrib_count.sum()) == 0

    def test_single_gaussian_center_pixel(self) -> None:
        cam = make_camera(15, 15)
        out = render(single_gaussian(), cam, mode=DeterministicMean(), background=(1.0, 0.0, 0.0))
        center = out.color[7, 7]
        assert torch.allclose(center, torch.tensor([0.75, 0.25, 0.25], dtype=DTYPE), atol=1e-12)
        assert float(out.alpha[7, 7]) == pytest.approx(0.5, abs=1e-12)
        assert int(out.contrib_count[7, 7]) == 1
        assert int(out.contrib_count[0, 0]) == 0
        assert torch.allclose(out.foreground[7, 7], torch.full((3,), 0.25, dtype=DTYPE), atol=1e-12)

    def test_color_is_foreground_over_background(self, cloud: GaussianCloud, camera: Camera) -> None:
        bg = torch.tensor([0.1, 0.2, 0.3], dtype=DTYPE)
        with torch.no_grad():
            out = render(cloud, camera, mode=DeterministicMean(), background=bg)
            black = render(cloud, camera, mode=DeterministicMean())
        composited = (out.foreground + (1.0 - out.alpha).unsqueeze(-1) * bg).clamp_min(0.0)
        assert torch.allclose(out.color, composited, atol=1e-12)
        assert float(out.foreground[out.alpha == 0].abs().sum()) == 0.0
        assert torch.allclose(black.color, black.foreground.clamp_min(0.0), atol=1e-12)

    def test_alpha_is_clamped(self) -> None:
        cam = make_camera(15, 15)
        out = render(single_gaussian(mu=20.0), cam, mode=DeterministicMean())
        assert float(out.alpha[7, 7]) == pytest.approx(0.99, abs=1e-12)

    def test_sh_dc_color(self) -> None:
        cam = make_camera(15, 15)
        cloud = single_gaussian(mu=20.0)
        cloud.sh[0] = torch.tensor([1.0, 0.0, -1.0], dtype=DTYPE)
        out = render(cloud, cam, mode=DeterministicMean())
        expected = 0.99 * (torch.tensor([1.0, 0.0, -1.0], dtype=DTYPE) * SH_C0 + 0.5)
        assert torch.allclose(out.color[7, 7], expected, atol=1e-12)

    def test_rgb_colors_shape(self, camera: Camera, cloud: GaussianCloud) -> None:
        with pytest.raises(ShapeError):
            render(cloud, camera, colors=RGBColors(torch.zeros(3, 3, dtype=DTYPE)))

    def test_front_gaussian_occludes(self) -> None:
        cam = make_camera(15, 15)
        cloud = GaussianCloud.zeros(2, sh_degree=0, embed_dim=1)
        cloud.s.fill_(math.log(0.05))
        cloud.mu.fill_(20.0)
        cloud.sigma_u.fill_(-30.0)
        cloud.X[0, 1] = 0.5  # further from the camera
        colors = RGBColors(torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], dtype=DTYPE))
        out = render(cloud, cam, colors=colors, mode=DeterministicMean())
        assert float(out.color[7, 7, 1]) > 0.98
        assert float(out.color[7, 7, 0]) < 0.01

    def test_behind_camera_is_skipped(self, camera: Camera) -> None:
        cloud = single_gaussian(mu=5.0)
        cloud.X[0, 1] = -10.0
        out = render(cloud, camera)
        assert not bool(out.visible[0])
        assert float(out.alpha.abs().max()) == 0.0

    @pytest.mark.parametrize("mode", [DeterministicMean(), InferenceExpected(), TrainStochastic(seed=7)])
    def test_matches_reference_renderer(self, mode: object) -> None:
        cam = make_camera(12, 12, focal=14.0)
        cloud = make_cloud(5, seed=9)
        # keeps transmittance well above the early termination threshold
        cloud.mu.sub_(2.0)
        fast = render(cloud, cam, mode=mode, background=(0.1, 0.2, 0.3)).color.detach().numpy()  # type: ignore[arg-type]
        slow = render_reference(cloud, cam, mode=mode, background=(0.1, 0.2, 0.3))  # type: ignore[arg-type]
        np.testing.assert_allclose(fast, slow, atol=1e-10, rtol=0.0)

    def test_stochastic_mode_is_seeded(self, camera: Camera, cloud: GaussianCloud) -> None:
        a = render(cloud, camera, mode=TrainStochastic(seed=1)).color
        b = render(cloud, camera, mode=TrainStochastic(seed=1)).color
        c = render(cloud, camera, mode=TrainStochastic(seed=2)).color
        assert torch.equal(a, b)
        assert not torch.equal(a, c)

    def test_fixed_eps_shape(self, camera: Camera, cloud: GaussianCloud) -> None:
        with pytest.raises(ShapeError):
            render(cloud, camera, mode=TrainStochastic(seed=0, eps=torch.zeros(3, dtype=DTYPE)))

    def test_zero_eps_equals_deterministic(self, camera: Camera, cloud: GaussianCloud) -> None:
        eps = torch.zeros(len(cloud), dtype=DTYPE)
        a = render(cloud, camera, mode=TrainStochastic(seed=0, eps=eps)).color
        b = render(cloud, camera, mode=DeterministicMean()).color
        assert torch.allclose(a, b, atol=1e-15)

    def test_render_image_is_clamped(self, camera: Camera, cloud: GaussianCloud) -> None:
        image = render_image(cloud, camera, colors=RGBColors(torch.full((len(cloud), 3), 4.0, dtype=DTYPE)))
        assert float(image.max()) <= 1.0
        assert not image.requires_grad


class TestRenderBackward:
    def test_gradients_for_every_parameter(self, camera: Camera) -> None:
        cloud = with_grad(make_cloud(6, seed=5))
        mode = TrainStochastic(seed=3)
        forward = render(cloud, camera, mode=mode)
        grads = render_backward(cloud, camera, mode, torch.ones_like(forward.color), forward)
        assert set(grads) == {"X", "q", "s", "mu", "sigma_u", "colors"}
        for name in ("X", "s", "mu", "colors"):
            assert float(grads[name].abs().sum()) > 0.0, name
        assert grads["colors"].shape == cloud.sh.shape

    def test_expected_mode_gives_sigma_gradient(self, camera: Camera) -> None:
        cloud = with_grad(make_cloud(6, seed=5))
        mode = InferenceExpected()
        forward = render(cloud, camera, mode=mode)
        grads = render_backward(cloud, camera, mode, torch.ones_like(forward.color), forward)
        assert float(grads["sigma_u"].abs().sum()) > 0.0

    def test_deterministic_mode_has_no_sigma_gradient(self, camera: Camera) -> None:
        cloud = with_grad(make_cloud(6, seed=5))
        mode = DeterministicMean()
        forward = render(cloud, camera, mode=mode)
        grads = render_backward(cloud, camera, mode, torch.ones_like(forward.color), forward)
        assert float(grads["sigma_u"].abs().sum()) == 0.0

    def test_zero_upstream(self, camera: Camera) -> None:
        cloud = with_grad(make_cloud(6, seed=5))
        mode = InferenceExpected()
        forward = render(cloud, camera, mode=mode)
        grads = render_backward(cloud, camera, mode, torch.zeros_like(forward.color), forward)
        for name, grad in grads.items():
            assert float(grad.abs().max()) == 0.0, name

    def test_mode_mismatch(self, camera: Camera) -> None:
        cloud = with_grad(make_cloud(6, seed=5))
        forward = render(cloud, camera, mode=TrainStochastic(seed=1))
        with pytest.raises(ContractError) as exc_info:
            render_backward(cloud, camera, TrainStochastic(seed=2), torch.ones_like(forward.color), forward)
        assert "mode mismatch" in str(exc_info.value)

    def test_needs_recorded_forward(self, camera: Camera) -> None:
        cloud = make_cloud(6, seed=5)
        mode = InferenceExpected()
        forward = render(cloud, camera, mode=mode)
        with pytest.raises(ContractError):
            render_backward(cloud, camera, mode, torch.ones_like(forward.color), forward)

    def test_viewspace_gradient(self, camera: Camera) -> None:
        cloud = with_grad(make_cloud(6, seed=5))
        forward = render(cloud, camera, colors=SHColors(cloud.sh))
        forward.color.sum().backward()
        assert forward.viewspace_points.grad is not None
        assert forward.viewspace_points.grad.shape == (6, 2)

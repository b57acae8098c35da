from __future__ import annotations

import math

import pytest
import torch

from splat_contrib.illumsplat.errors import NumericDomainError, ShapeError
from splat_contrib.illumsplat.numerics import (
    DTYPE,
    SH_C0,
    SH_C1,
    Tape,
    backward,
    compare_gradients,
    ensure_finite,
    finite_difference,
    logit,
    sh_coeff_count,
    sh_degree_for,
    sh_evaluate,
    sigmoid,
    sigmoid_grad,
    softplus_inverse,
)


class TestSigmoid:
    def test_zero_is_one_half(self) -> None:
        assert sigmoid(0.0) == 0.5

    def test_known_value(self) -> None:
        assert sigmoid(1.0) == pytest.approx(0.7310585786300049, abs=1e-15)

    def test_saturates_without_underflow(self) -> None:
        value = sigmoid(-40.0)
        assert 0.0 <= value <= 1e-17
        assert sigmoid(-1000.0) == 0.0
        assert sigmoid(1000.0) == 1.0

    def test_derivative(self) -> None:
        assert sigmoid_grad(0.0) == 0.25

    @pytest.mark.parametrize("value", [math.nan, math.inf, -math.inf])
    def test_non_finite_input(self, value: float) -> None:
        with pytest.raises(NumericDomainError) as exc_info:
            sigmoid(value)
        assert "sigmoid input" in str(exc_info.value)

    def test_logit_inverts_sigmoid(self) -> None:
        assert sigmoid(logit(0.01)) == pytest.approx(0.01, abs=1e-15)

    def test_logit_domain(self) -> None:
        with pytest.raises(NumericDomainError):
            logit(1.0)

    def test_softplus_inverse(self) -> None:
        y = torch.tensor([0.1, 0.5, 2.0], dtype=DTYPE)
        assert torch.allclose(torch.nn.functional.softplus(softplus_inverse(y)), y, atol=1e-12)


class TestSphericalHarmonics:
    def test_coefficient_count(self) -> None:
        assert [sh_coeff_count(d) for d in range(4)] == [3, 12, 27, 48]
        assert sh_degree_for(27) == 2

    def test_dc_band_is_isotropic(self) -> None:
        coeffs = torch.zeros(48, dtype=DTYPE)
        coeffs[:3] = torch.tensor([1.0, 2.0, -0.5], dtype=DTYPE)
        for direction in ([1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.0, 0.0, -1.0]):
            color = sh_evaluate(torch.tensor(direction, dtype=DTYPE), coeffs)
            expected = torch.tensor([1.0, 2.0, -0.5], dtype=DTYPE) * SH_C0
            assert torch.allclose(color, expected, atol=1e-12)

    def test_first_band_sign(self) -> None:
        coeffs = torch.zeros(12, dtype=DTYPE)
        coeffs[3:6] = 1.0  # band k=1, all channels
        color = sh_evaluate(torch.tensor([0.0, 1.0, 0.0], dtype=DTYPE), coeffs)
        assert torch.allclose(color, torch.full((3,), -SH_C1, dtype=DTYPE), atol=1e-12)
        assert SH_C1 == pytest.approx(0.48860251, abs=1e-8)

    def test_linearity(self) -> None:
        g = torch.Generator().manual_seed(3)
        d = torch.randn(5, 3, generator=g, dtype=DTYPE)
        d = d / d.norm(dim=-1, keepdim=True)
        c1 = torch.randn(5, 48, generator=g, dtype=DTYPE)
        c2 = torch.randn(5, 48, generator=g, dtype=DTYPE)
        combined = sh_evaluate(d, 2.0 * c1 - 0.5 * c2)
        separate = 2.0 * sh_evaluate(d, c1) - 0.5 * sh_evaluate(d, c2)
        assert torch.allclose(combined, separate, atol=1e-12)

    def test_wrong_coefficient_count(self) -> None:
        with pytest.raises(ShapeError):
            sh_evaluate(torch.tensor([0.0, 0.0, 1.0], dtype=DTYPE), torch.zeros(10, dtype=DTYPE))


class TestTape:
    def test_square(self) -> None:
        tape = Tape()
        x = tape.register("x", torch.tensor(3.0, dtype=DTYPE))
        grads = tape.backward(x * x)
        assert float(grads["x"]) == 6.0

    def test_sigmoid_at_zero(self) -> None:
        tape = Tape({"x": torch.tensor(0.0, dtype=DTYPE)})
        grads = tape.backward(torch.sigmoid(tape.leaves()["x"]))
        assert float(grads["x"]) == 0.25

    def test_registration_order_and_unused_leaves(self) -> None:
        tape = Tape()
        a = tape.register("a", torch.ones(2, dtype=DTYPE))
        tape.register("b", torch.ones(3, dtype=DTYPE))
        grads = tape.backward((2.0 * a).sum())
        assert list(grads) == ["a", "b"]
        assert torch.equal(grads["b"], torch.zeros(3, dtype=DTYPE))

    def test_duplicate_leaf(self) -> None:
        tape = Tape({"a": torch.ones(1, dtype=DTYPE)})
        with pytest.raises(KeyError):
            tape.register("a", torch.ones(1, dtype=DTYPE))

    def test_leaves_must_be_float64(self) -> None:
        with pytest.raises(ShapeError):
            Tape({"a": torch.ones(1, dtype=torch.float32)})

    def test_loss_must_be_scalar(self) -> None:
        x = torch.ones(2, dtype=DTYPE, requires_grad=True)
        with pytest.raises(ShapeError) as exc_info:
            backward(x * 2.0, {"x": x})
        assert "scalar" in str(exc_info.value)

    def test_non_finite_loss(self) -> None:
        x = torch.tensor(-1.0, dtype=DTYPE, requires_grad=True)
        with pytest.raises(NumericDomainError):
            backward(torch.sqrt(x), {"x": x})

    def test_repeated_backward_is_bit_identical(self) -> None:
        g = torch.Generator().manual_seed(0)
        x = torch.randn(50, generator=g, dtype=DTYPE, requires_grad=True)
        first = backward(torch.sigmoid(x * x).sum(), {"x": x})["x"]
        second = backward(torch.sigmoid(x * x).sum(), {"x": x})["x"]
        assert torch.equal(first, second)


class TestFiniteDifference:
    def test_composite_graph(self) -> None:
        g = torch.Generator().manual_seed(11)
        x = (4.0 * torch.rand(6, generator=g, dtype=DTYPE) - 2.0).requires_grad_(True)
        y = (4.0 * torch.rand(6, generator=g, dtype=DTYPE) - 2.0).requires_grad_(True)

        def fn() -> torch.Tensor:
            return (torch.sigmoid(x * y) + torch.exp(-x * x) * y + torch.sin(y)).sum()

        grads = backward(fn(), {"x": x, "y": y})
        for name, tensor in (("x", x), ("y", y)):
            numeric = finite_difference(fn, tensor)
            result = compare_gradients(name, grads[name], numeric)
            assert result.passed, result

    def test_restores_the_tensor(self) -> None:
        x = torch.tensor([1.0, 2.0], dtype=DTYPE, requires_grad=True)
        finite_difference(lambda: (x * x).sum(), x)
        assert torch.equal(x.detach(), torch.tensor([1.0, 2.0], dtype=DTYPE))

    def test_selected_indices(self) -> None:
        x = torch.tensor([1.0, 2.0, 3.0], dtype=DTYPE)
        numeric = finite_difference(lambda: (x * x).sum(), x, indices=[1])
        assert numeric[0] == 0.0 and numeric[2] == 0.0
        assert float(numeric[1]) == pytest.approx(4.0, rel=1e-8)

    def test_mismatch_is_reported(self) -> None:
        analytic = torch.tensor([1.0, 2.0], dtype=DTYPE)
        result = compare_gradients("w", analytic * 1.01, analytic)
        assert not result.passed
        assert result.name == "w"
        assert result.max_rel_error == pytest.approx(0.01, rel=1e-6)
        assert result.checked == 2

    def test_ensure_finite(self) -> None:
        ensure_finite("ok", torch.ones(2, dtype=DTYPE))
        with pytest.raises(NumericDomainError) as exc_info:
            ensure_finite("weights", torch.tensor([1.0, math.nan], dtype=DTYPE))
        assert "weights" in str(exc_info.value)

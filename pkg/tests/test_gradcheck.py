from __future__ import annotations

import pytest

from splat_contrib.illumsplat.errors import GradientCheckError, ValidationError
from splat_contrib.illumsplat.gradcheck import (
    CASES,
    check_field,
    check_opacity,
    check_rasterizer,
    ensure_passed,
    run_gradcheck,
)
from splat_contrib.illumsplat.testing import CorruptGradient


class TestOpacityGradients:
    def test_passes(self) -> None:
        results = check_opacity(seed=0)
        names = [r.name for r in results]
        assert names == [
            "opacity:train:mu",
            "opacity:train:sigma",
            "opacity:train:ratio",
            "opacity:expected:mu",
            "opacity:expected:sigma",
        ]
        assert all(r.passed for r in results), [r for r in results if not r.passed]

    @pytest.mark.parametrize("parameter", ["mu", "sigma"])
    def test_corrupted_gradient_is_named(self, parameter: str) -> None:
        corrupt = CorruptGradient(parameter)
        report = run_gradcheck(seed=0, cases="opacity", corrupt=corrupt)
        assert not report.passed
        assert report.failures()[0].name == f"opacity:train:{parameter}"
        assert corrupt.calls >= 2
        with pytest.raises(GradientCheckError) as exc_info:
            ensure_passed(report)
        assert exc_info.value.parameter == f"opacity:train:{parameter}"
        assert f"opacity:train:{parameter}" in str(exc_info.value)


class TestRasterizerGradients:
    def test_passes(self) -> None:
        results = check_rasterizer(seed=0)
        assert len(results) == 3 * 6
        assert all(r.passed for r in results), [r for r in results if not r.passed]
        assert "rasterizer:TrainStochastic:sigma_u" in [r.name for r in results]

    def test_corrupted_position_gradient(self) -> None:
        corrupt = CorruptGradient("X", factor=2.0)
        report = run_gradcheck(seed=0, cases="rasterizer", corrupt=corrupt)
        failed = {r.name for r in report.failures()}
        assert failed == {f"rasterizer:{mode}:X" for mode in ("DeterministicMean", "InferenceExpected", "TrainStochastic")}
        assert corrupt.calls == 3


class TestFieldGradients:
    def test_passes(self) -> None:
        results = check_field(seed=0)
        names = [r.name for r in results]
        assert names[0] == "field:e"
        for prefix in ("encoder", "decoder", "color_mlp", "generator"):
            assert any(name.startswith(f"field:{prefix}.") for name in names), prefix
        assert all(r.passed for r in results), [r for r in results if not r.passed]

    def test_corrupted_embedding(self) -> None:
        report = run_gradcheck(seed=0, cases="field", corrupt=CorruptGradient("e", factor=0.5))
        assert [r.name for r in report.failures()] == ["field:e"]


class TestRunGradcheck:
    def test_unknown_case(self) -> None:
        with pytest.raises(ValidationError) as exc_info:
            run_gradcheck(cases="everything")
        assert "unknown gradient check case" in str(exc_info.value)
        assert CASES == ("all", "opacity", "rasterizer", "field")

    def test_report_as_dict(self) -> None:
        report = ensure_passed(run_gradcheck(seed=1, cases="opacity"))
        summary = report.as_dict()
        assert summary["passed"] is True
        assert summary["cases"] == "opacity"
        assert len(summary["checks"]) == 5  # type: ignore[arg-type]

    @pytest.mark.slow
    def test_all_suites_for_several_seeds(self) -> None:
        for seed in range(3):
            ensure_passed(run_gradcheck(seed=seed))

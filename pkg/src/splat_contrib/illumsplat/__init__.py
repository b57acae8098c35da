from . import illumination, scene, synthbench, trainer
from .errors import (
    ConfigError,
    ContractError,
    ConvergenceError,
    CulledBehindCamera,
    FormatError,
    GradientCheckError,
    NumericDomainError,
    ShapeError,
    SplatError,
    UnsupportedVariantError,
    ValidationError,
)
from .gradcheck import GradCheckReport, run_gradcheck
from .models import EvalRow, MetricsRow
from .rasterizer import (
    DeterministicMean,
    InferenceExpected,
    RenderMode,
    RenderOutput,
    SHColors,
    TrainStochastic,
    opacity_expected,
    opacity_train,
    render,
    render_backward,
    render_reference,
)
from .scene import Camera, GaussianCloud, GaussianPrimitive
from .trainer import TrainConfig, TrainState, run_training

__all__ = [
    "illumination",
    "opacity_expected",
    "opacity_train",
    "render",
    "render_backward",
    "render_reference",
    "run_gradcheck",
    "run_training",
    "scene",
    "synthbench",
    "trainer",
    "Camera",
    "ConfigError",
    "ContractError",
    "ConvergenceError",
    "CulledBehindCamera",
    "DeterministicMean",
    "EvalRow",
    "FormatError",
    "GaussianCloud",
    "GaussianPrimitive",
    "GradCheckReport",
    "GradientCheckError",
    "InferenceExpected",
    "MetricsRow",
    "NumericDomainError",
    "RenderMode",
    "RenderOutput",
    "SHColors",
    "ShapeError",
    "SplatError",
    "TrainConfig",
    "TrainState",
    "TrainStochastic",
    "UnsupportedVariantError",
    "ValidationError",
]

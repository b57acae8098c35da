from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Union

import numpy as np

from ..errors import ConfigError
from ..models import Base
from ..rasterizer import DeterministicMean, InferenceExpected, RenderMode, TrainStochastic

PathLike = Union[str, Path]

LATENT_KINDS = ("from-image", "sample", "style-queue")


@dataclass(frozen=True)
class VariantFlags:
    """Switchboard of the ablation variants."""

    neural_field: bool
    stochastic_opacity: bool
    """Stochastic opacity in training and expected opacity at inference."""
    opacity_reset: bool
    """Periodic opacity resetting."""

    def train_mode(self, seed: int) -> RenderMode:
        return TrainStochastic(seed) if self.stochastic_opacity else DeterministicMean()

    def inference_mode(self) -> RenderMode:
        return InferenceExpected() if self.stochastic_opacity else DeterministicMean()


VARIANTS = {
    "M1": VariantFlags(neural_field=False, stochastic_opacity=False, opacity_reset=True),
    "M2": VariantFlags(neural_field=True, stochastic_opacity=False, opacity_reset=True),
    "M3": VariantFlags(neural_field=True, stochastic_opacity=True, opacity_reset=True),
    "M4": VariantFlags(neural_field=False, stochastic_opacity=True, opacity_reset=True),
    "M5": VariantFlags(neural_field=False, stochastic_opacity=True, opacity_reset=False),
    "M6": VariantFlags(neural_field=True, stochastic_opacity=True, opacity_reset=False),
}


@dataclass
class TrainConfig(Base):
    iterations: int = 3000
    seed: int = 0
    variant: str = "M6"

    lambda_ucn: float = 0.0005
    ucn_sign: float = -1.0
    """Sign of the uncertainty term: -1 rewards larger sigma, +1 penalizes it."""
    tau: float = 0.07
    dssim_weight: float = 0.2

    lr_position: float = 1.6e-4
    lr_position_final: float = 1.6e-6
    lr_sh: float = 2.5e-3
    lr_opacity: float = 5e-2
    lr_scale: float = 5e-3
    lr_rotation: float = 1e-3
    lr_embedding: float = 2.5e-3
    lr_networks: float = 1e-3

    densify_interval: int = 100
    densify_from: int = 500
    densify_until: int = 1500
    densify_grad_threshold: float = 2e-4
    percent_dense: float = 0.01
    prune_opacity: float = 0.005
    opacity_reset_interval: int = 300
    max_gaussians: int = 1000

    init_gaussians: int = 300
    init_opacity: float = 0.1
    init_sigma: float = 0.1

    styles: int = 3
    queue_capacity: int = 64
    sh_degree: int = 3
    embed_dim: int = 8
    latent_channels: int = 24
    latent_height: int = 8
    latent_width: int = 8
    feature_channels: int = 16
    pe_bands: int = 4
    zero_residual: bool = True

    log_interval: int = 100
    eval_latent: str = "from-image"

    @property
    def flags(self) -> VariantFlags:
        return VARIANTS[self.variant]

    def validate(self) -> TrainConfig:
        """Check ranges and the variant name.

        Raises:
            ConfigError: naming the first offending key.
        """
        if self.variant not in VARIANTS:
            raise ConfigError("variant", f"variant must be one of {', '.join(VARIANTS)}")
        if self.eval_latent not in LATENT_KINDS:
            raise ConfigError("eval_latent", f"eval_latent must be one of {', '.join(LATENT_KINDS)}")
        if self.ucn_sign not in (-1.0, 1.0):
            raise ConfigError("ucn_sign", "ucn_sign must be -1 or 1")
        for item in fields(self):
            if item.name.startswith("lr_") and getattr(self, item.name) <= 0:
                raise ConfigError(item.name, "learning rates must be positive")
        positive = (
            "tau",
            "densify_interval",
            "log_interval",
            "queue_capacity",
            "max_gaussians",
            "opacity_reset_interval",
            "latent_channels",
            "latent_height",
            "latent_width",
            "feature_channels",
            "init_gaussians",
        )
        for key in positive:
            if getattr(self, key) <= 0:
                raise ConfigError(key, "value must be positive")
        non_negative = ("iterations", "lambda_ucn", "styles", "pe_bands", "embed_dim", "init_sigma")
        for key in non_negative:
            if getattr(self, key) < 0:
                raise ConfigError(key, "value must not be negative")
        if not 0.0 <= self.dssim_weight <= 1.0:
            raise ConfigError("dssim_weight", "dssim_weight must be in [0, 1]")
        if not 0.0 < self.init_opacity < 1.0:
            raise ConfigError("init_opacity", "init_opacity must be in (0, 1)")
        if not 0 <= self.sh_degree <= 3:
            raise ConfigError("sh_degree", "sh_degree must be in [0, 3]")
        return self


def parse_config(text: str) -> TrainConfig:
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {number} is not a 'key = value' pair")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return TrainConfig.from_mapping(values, strict=True).validate()


def load_config(path: PathLike) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(config: TrainConfig) -> str:
    lines = []
    for key, value in config.as_dict().items():
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_config(path: PathLike, config: TrainConfig) -> None:
    Path(path).write_text(format_config(config), encoding="utf-8")


def exponential_lr(lr_init: float, lr_final: float, max_steps: int) -> Callable[[int], float]:
    """Log-linear interpolation from lr_init at step 0 to lr_final at max_steps."""

    def helper(step: int) -> float:
        if max_steps <= 0:
            return lr_init
        t = float(np.clip(step / max_steps, 0.0, 1.0))
        return float(np.exp(np.log(lr_init) * (1.0 - t) + np.log(lr_final) * t))

    return helper

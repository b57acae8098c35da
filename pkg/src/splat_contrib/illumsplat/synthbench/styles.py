from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ValidationError
from ..internal import derive_seed
from ..numerics import DTYPE

JITTER_MODES = 3


@dataclass(frozen=True)
class StyleTransform:
    """Affine color transform emulating one restoration model's output."""

    style_id: int
    gain: tuple[float, float, float] = (1.0, 1.0, 1.0)
    bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    jitter: float = 0.0
    """Amplitude of the per-view multiplicative field."""

    def __post_init__(self) -> None:
        if any(g <= 0 for g in self.gain):
            raise ValidationError(f"style {self.style_id}: gains must be positive, got {self.gain}")
        if self.jitter < 0:
            raise ValidationError(f"style {self.style_id}: jitter must be >= 0, got {self.jitter}")

    @property
    def is_identity(self) -> bool:
        return self.gain == (1.0, 1.0, 1.0) and self.bias == (0.0, 0.0, 0.0) and self.jitter == 0.0

    def describe(self) -> str:
        gain = " ".join(repr(v) for v in self.gain)
        bias = " ".join(repr(v) for v in self.bias)
        return f"style {self.style_id} gain {gain} bias {bias} jitter {self.jitter!r}"

    @classmethod
    def parse(cls, line: str) -> StyleTransform:
        tokens = line.split()
        try:
            if tokens[0] != "style" or tokens[2] != "gain" or tokens[6] != "bias" or tokens[10] != "jitter":
                raise ValueError("unexpected keyword")
            return cls(
                style_id=int(tokens[1]),
                gain=(float(tokens[3]), float(tokens[4]), float(tokens[5])),
                bias=(float(tokens[7]), float(tokens[8]), float(tokens[9])),
                jitter=float(tokens[11]),
            )
        except (IndexError, ValueError):
            raise ValidationError(f"malformed style line: {line!r}") from None


def random_styles(count: int, seed: int, jitter: float = 0.05) -> list[StyleTransform]:
    """Identity style 0 followed by `count` random color casts."""
    if count < 0:
        raise ValidationError(f"style count must be >= 0, got {count}")
    styles = [StyleTransform(0)]
    for m in range(1, count + 1):
        rng = np.random.default_rng(derive_seed(seed, 0x57, m))
        gain = tuple(float(v) for v in rng.uniform(0.7, 1.3, size=3))
        bias = tuple(float(v) for v in rng.uniform(-0.1, 0.1, size=3))
        styles.append(StyleTransform(m, gain, bias, jitter))  # type: ignore[arg-type]
    return styles


def jitter_field(height: int, width: int, amplitude: float, seed: int, view: int, style_id: int) -> torch.Tensor:
    """Smooth (H, W, 3) field with |values| <= amplitude.

    A few low-frequency cosine modes per channel, seeded by (seed, view, style).
    """
    if amplitude == 0.0:
        return torch.zeros((height, width, 3), dtype=DTYPE)
    rng = np.random.default_rng(derive_seed(seed, view, style_id))
    ys, xs = np.meshgrid(np.arange(height) / height, np.arange(width) / width, indexing="ij")
    field = np.zeros((height, width, 3))
    for channel in range(3):
        weights = rng.uniform(-1.0, 1.0, size=JITTER_MODES)
        freqs = rng.integers(0, 3, size=(JITTER_MODES, 2))
        phases = rng.uniform(0.0, 2.0 * math.pi, size=JITTER_MODES)
        for k in range(JITTER_MODES):
            field[..., channel] += weights[k] * np.cos(2.0 * math.pi * (freqs[k, 0] * xs + freqs[k, 1] * ys) + phases[k])
    field *= amplitude / JITTER_MODES
    return torch.from_numpy(field)


def apply_style(image: torch.Tensor, style: StyleTransform, seed: int, view: int) -> torch.Tensor:
    """clamp(gain * image * (1 + J) + bias) for a ground-truth render."""
    if style.is_identity:
        return image.clone()
    height, width = int(image.shape[0]), int(image.shape[1])
    jitter = jitter_field(height, width, style.jitter, seed, view, style.style_id)
    gain = torch.tensor(style.gain, dtype=DTYPE)
    bias = torch.tensor(style.bias, dtype=DTYPE)
    return (gain * image * (1.0 + jitter) + bias).clamp(0.0, 1.0)

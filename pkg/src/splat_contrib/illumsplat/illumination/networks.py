from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ShapeError
from ..internal import seeded
from ..numerics import DTYPE

ENCODER_STRIDE = 8


@dataclass
class NetworkShape:
    """Sizes shared by the four field networks."""

    latent_channels: int = 24
    latent_height: int = 8
    latent_width: int = 8
    feature_channels: int = 16
    embed_dim: int = 8
    sh_coeffs: int = 48
    pe_bands: int = 4
    hidden: int = 64
    generator_channels: int = 32

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        return (self.latent_channels, self.latent_height, self.latent_width)

    @property
    def mlp_inputs(self) -> int:
        return self.feature_channels + self.embed_dim + positional_encoding_size(self.pe_bands)


def positional_encoding_size(bands: int) -> int:
    return 3 + 3 * 2 * bands


def positional_encoding(X: torch.Tensor, bands: int) -> torch.Tensor:
    """Raw positions followed by sin/cos at frequencies 2^k * pi, k < bands."""
    if bands == 0:
        return X
    freqs = math.pi * 2.0 ** torch.arange(bands, dtype=X.dtype)
    angles = (X.unsqueeze(-1) * freqs).reshape(*X.shape[:-1], -1)
    return torch.cat([X, torch.sin(angles), torch.cos(angles)], dim=-1)


class Encoder(nn.Module):
    """Image (H, W, 3) to latent (C_z, H_z, W_z) with three stride-2 blocks."""

    def __init__(self, shape: NetworkShape) -> None:
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(3, 16, kernel_size=3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 16, kernel_size=3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, shape.latent_channels, kernel_size=3, stride=2, padding=1),
        )
        self.pool = nn.AdaptiveAvgPool2d((shape.latent_height, shape.latent_width))

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() != 3 or image.shape[-1] != 3:
            raise ShapeError(f"encoder expects an (H, W, 3) image, got {tuple(image.shape)}")
        height, width = int(image.shape[0]), int(image.shape[1])
        if height % ENCODER_STRIDE or width % ENCODER_STRIDE:
            raise ShapeError(f"image size {width}x{height} is not divisible by the encoder stride {ENCODER_STRIDE}")
        x = image.permute(2, 0, 1).unsqueeze(0)
        return self.pool(self.body(x)).squeeze(0)


class Decoder(nn.Module):
    """Latent to a C_f channel feature map at the conditioning image size."""

    def __init__(self, shape: NetworkShape) -> None:
        super().__init__()
        c = shape.feature_channels
        self.body = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
            nn.Conv2d(shape.latent_channels, c, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
            nn.Conv2d(c, c, kernel_size=3, padding=1),
            nn.ReLU(),
            nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
            nn.Conv2d(c, c, kernel_size=3, padding=1),
        )

    def forward(self, z: torch.Tensor, height: int, width: int) -> torch.Tensor:
        x = self.body(z.unsqueeze(0))
        x = F.interpolate(x, size=(height, width), mode="bilinear", align_corners=False)
        return x.squeeze(0)


class ColorMLP(nn.Module):
    def __init__(self, shape: NetworkShape, zero_residual: bool = True) -> None:
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(shape.mlp_inputs, shape.hidden),
            nn.ReLU(),
            nn.Linear(shape.hidden, shape.hidden),
            nn.ReLU(),
            nn.Linear(shape.hidden, shape.sh_coeffs),
        )
        if zero_residual:
            # Starts training from plain splatting colors.
            last = self.layers[-1]
            assert isinstance(last, nn.Linear)
            nn.init.zeros_(last.weight)
            nn.init.zeros_(last.bias)

    def forward(self, inputs: torch.Tensor) -> torch.Tensor:
        return self.layers(inputs)


class Generator(nn.Module):
    """Five 3x3 convolutions with ReLU between them, z-shaped in and out."""

    def __init__(self, shape: NetworkShape) -> None:
        super().__init__()
        c, g = shape.latent_channels, shape.generator_channels
        widths = [c, g, g, g, g, c]
        layers: list[nn.Module] = []
        for index in range(5):
            layers.append(nn.Conv2d(widths[index], widths[index + 1], kernel_size=3, padding=1))
            if index < 4:
                layers.append(nn.ReLU())
        self.body = nn.Sequential(*layers)

    def forward(self, noise: torch.Tensor) -> torch.Tensor:
        return self.body(noise.unsqueeze(0)).squeeze(0)


class FieldNetworks(nn.Module):
    """Encoder, decoder, color MLP and generator, in float64."""

    def __init__(self, shape: NetworkShape, seed: int = 0, zero_residual: bool = True) -> None:
        super().__init__()
        self.shape = shape
        with seeded(seed, 1):
            self.encoder = Encoder(shape)
        with seeded(seed, 2):
            self.decoder = Decoder(shape)
        with seeded(seed, 3):
            self.color_mlp = ColorMLP(shape, zero_residual=zero_residual)
        with seeded(seed, 4):
            self.generator = Generator(shape)
        self.to(DTYPE)

    def named_tensors(self) -> dict[str, torch.Tensor]:
        """Parameters keyed by dotted name, in registration order."""
        return dict(self.named_parameters())

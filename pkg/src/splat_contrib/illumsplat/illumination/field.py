from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import ShapeError
from ..internal import tensor_digest
from ..rasterizer import SHColors
from ..scene import Camera, GaussianCloud, project_points
from .networks import FieldNetworks, positional_encoding

logger = logging.getLogger(__name__)


class LatentSource(enum.Enum):
    ENCODER = "encoder"
    GENERATOR = "generator"
    CLEAN_SCENE = "clean-scene"
    QUEUE_MEAN = "queue-mean"


@dataclass
class IlluminationLatent:
    z: torch.Tensor
    """(C_z, H_z, W_z) latent code."""
    style_id: int | None
    """Style the latent was produced from, None for generated latents."""
    source: LatentSource

    def normalized(self) -> torch.Tensor:
        return normalize_latent(self.z)

    def detached(self) -> IlluminationLatent:
        return IlluminationLatent(self.z.detach().clone(), self.style_id, self.source)


def normalize_latent(z: torch.Tensor) -> torch.Tensor:
    """Flatten and scale to unit L2 norm."""
    flat = z.reshape(-1)
    return flat / flat.norm().clamp_min(1e-12)


def encode(
    networks: FieldNetworks,
    image: torch.Tensor,
    style_id: int | None = None,
    source: LatentSource = LatentSource.ENCODER,
) -> IlluminationLatent:
    """Encode an (H, W, 3) image into an illumination latent."""
    return IlluminationLatent(networks.encoder(image), style_id, source)


def decode(networks: FieldNetworks, z: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Feature map (C_f, height, width) for a latent."""
    return networks.decoder(z, height, width)


def sample_point_features(features: torch.Tensor, X: torch.Tensor, cond_cam: Camera) -> torch.Tensor:
    """Bilinear feature lookup at each gaussian's projection, shape (N, C_f).

    Pixel centers sit at integer coordinates. Points outside the image read
    zero padding; points at or behind the near plane get zero features.
    """
    channels, height, width = features.shape
    if height != cond_cam.height or width != cond_cam.width:
        raise ShapeError(f"feature map is {width}x{height}, conditioning camera is {cond_cam.width}x{cond_cam.height}")
    if X.shape[0] == 0:
        return features.new_zeros((0, channels))
    uv, _, valid = project_points(X, cond_cam)
    gx = uv[:, 0] * (2.0 / max(width - 1, 1)) - 1.0
    gy = uv[:, 1] * (2.0 / max(height - 1, 1)) - 1.0
    grid = torch.stack([gx, gy], dim=-1).reshape(1, 1, -1, 2)
    sampled = F.grid_sample(features.unsqueeze(0), grid, mode="bilinear", padding_mode="zeros", align_corners=True)
    sampled = sampled.reshape(channels, -1).transpose(0, 1)
    return sampled * valid.unsqueeze(-1).to(sampled.dtype)


def predict_color_residual(networks: FieldNetworks, features: torch.Tensor, e: torch.Tensor, X: torch.Tensor) -> torch.Tensor:
    """SH residual v_i = MLP(l_i, e_i, gamma(X_i)), shape (N, 3 * (D + 1) ** 2)."""
    inputs = torch.cat([features, e, positional_encoding(X, networks.shape.pe_bands)], dim=-1)
    return networks.color_mlp(inputs)


def generate_latent(networks: FieldNetworks, noise: torch.Tensor) -> IlluminationLatent:
    if tuple(noise.shape) != networks.shape.latent_shape:
        raise ShapeError(f"noise must have the latent shape {networks.shape.latent_shape}, got {tuple(noise.shape)}")
    return IlluminationLatent(networks.generator(noise), None, LatentSource.GENERATOR)


def sample_noise(networks: FieldNetworks, generator: torch.Generator) -> torch.Tensor:
    return torch.randn(networks.shape.latent_shape, generator=generator, dtype=torch.float64)


def evaluate_field(networks: FieldNetworks, cloud: GaussianCloud, latent: IlluminationLatent, cond_cam: Camera) -> SHColors:
    """Run decode, feature sampling and the color MLP once.

    The result holds sh_i + v_i for every gaussian and depends on the render
    camera only through the SH viewing direction applied by the rasterizer.
    """
    features = decode(networks, latent.z, cond_cam.height, cond_cam.width)
    point_features = sample_point_features(features, cloud.X, cond_cam)
    residual = predict_color_residual(networks, point_features, cloud.e, cloud.X)
    return SHColors(cloud.sh + residual)


class FieldEvaluator:
    """Caches view-shared colors per (cloud, latent, conditioning camera).

    `evaluations` counts actual network executions.
    """

    def __init__(self, networks: FieldNetworks) -> None:
        self.networks = networks
        self.evaluations = 0
        self._key: tuple[GaussianCloud, IlluminationLatent, Camera] | None = None
        self._colors: SHColors | None = None

    def colors(self, cloud: GaussianCloud, latent: IlluminationLatent, cond_cam: Camera) -> SHColors:
        key = (cloud, latent, cond_cam)
        if self._colors is None or self._key is None or any(a is not b for a, b in zip(self._key, key)):
            with torch.no_grad():
                self._colors = evaluate_field(self.networks, cloud, latent, cond_cam)
            self._key = key
            self.evaluations += 1
            logger.info("view-shared feature hash %s", tensor_digest(self._colors.coeffs)[:16])
        return self._colors

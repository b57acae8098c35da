"""Training state, optimizer bookkeeping and checkpoints.

A checkpoint directory contains::

    scene.gspl      gaussians (scene file format)
    networks.bin    field network weights (tensor archive)
    optimizer.bin   Adam moments, iteration, RNG state, latent queues,
                    densification statistics (tensor archive)
    config.txt      the TrainConfig used
    cameras.txt     cameras of the training dataset
    metrics.csv     metrics log
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import torch

from ..errors import FormatError, ValidationError
from ..illumination import FieldNetworks, LatentQueueBank, NetworkShape
from ..internal import derive_seed
from ..models import MetricsRow
from ..numerics import DTYPE, sh_coeff_count, softplus_inverse
from ..scene import (
    PARAMETER_NAMES,
    Camera,
    GaussianCloud,
    read_camera_set,
    read_scene,
    read_tensor_archive,
    write_camera_set,
    write_scene,
    write_tensor_archive,
)
from .config import TrainConfig, VariantFlags, exponential_lr, load_config, write_config

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCENE_FILE = "scene.gspl"
NETWORKS_FILE = "networks.bin"
OPTIMIZER_FILE = "optimizer.bin"
CONFIG_FILE = "config.txt"
CAMERAS_FILE = "cameras.txt"
METRICS_FILE = "metrics.csv"

NETWORK_GROUP = "networks"


def cameras_extent(cameras: list[Camera]) -> float:
    """1.1 times the largest distance of a camera center from their mean."""
    centers = torch.stack([cam.center for cam in cameras])
    mean = centers.mean(dim=0)
    return 1.1 * float((centers - mean).norm(dim=-1).max())


@dataclass
class MetricWindow:
    """Running sums of the loss terms over one logging window."""

    rec: float = 0.0
    contra: float = 0.0
    ucn: float = 0.0
    psnr: float = 0.0
    steps: int = 0

    def add(self, rec: float, contra: float, ucn: float, psnr: float) -> None:
        self.rec += rec
        self.contra += contra
        self.ucn += ucn
        self.psnr += psnr
        self.steps += 1

    def row(self, iteration: int) -> MetricsRow:
        n = max(self.steps, 1)
        return MetricsRow(iteration, self.rec / n, self.contra / n, self.ucn / n, self.psnr / n)

    def as_tensor(self) -> torch.Tensor:
        return torch.tensor([self.rec, self.contra, self.ucn, self.psnr, float(self.steps)], dtype=DTYPE)

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor) -> MetricWindow:
        rec, contra, ucn, psnr, steps = tensor.tolist()
        return cls(rec, contra, ucn, psnr, int(steps))


@dataclass
class TrainState:
    config: TrainConfig
    cloud: GaussianCloud
    networks: FieldNetworks
    optimizer: torch.optim.Adam
    bank: LatentQueueBank
    generator: torch.Generator
    cameras: list[Camera]
    extent: float
    iteration: int = 0
    grad_accum: torch.Tensor = field(default_factory=lambda: torch.zeros(0, dtype=DTYPE))
    denom: torch.Tensor = field(default_factory=lambda: torch.zeros(0, dtype=DTYPE))
    window: MetricWindow = field(default_factory=MetricWindow)
    metrics: list[MetricsRow] = field(default_factory=list)

    @property
    def flags(self) -> VariantFlags:
        return self.config.flags

    def trainable_names(self) -> list[str]:
        """Gaussian parameter groups the variant optimizes."""
        names = ["X", "q", "s", "mu", "sh"]
        if self.flags.stochastic_opacity:
            names.insert(4, "sigma_u")
        if self.flags.neural_field:
            names.append("e")
        return names

    def position_lr(self, iteration: int) -> float:
        schedule = exponential_lr(
            self.config.lr_position * self.extent,
            self.config.lr_position_final * self.extent,
            self.config.iterations,
        )
        return schedule(iteration)

    def update_learning_rate(self) -> None:
        for group in self.optimizer.param_groups:
            if group["name"] == "X":
                group["lr"] = self.position_lr(self.iteration)

    def reset_densification_stats(self) -> None:
        self.grad_accum = torch.zeros(len(self.cloud), dtype=DTYPE)
        self.denom = torch.zeros(len(self.cloud), dtype=DTYPE)

    def _set_tensors(self, tensors: dict[str, torch.Tensor]) -> None:
        self.cloud = GaussianCloud(**{name: tensors[name] for name in PARAMETER_NAMES})

    def replace_tensor(self, name: str, tensor: torch.Tensor) -> None:
        """Swap one gaussian parameter, zeroing its Adam moments."""
        tensors = self.cloud.tensors()
        for group in self.optimizer.param_groups:
            if group["name"] != name:
                continue
            old = group["params"][0]
            stored = self.optimizer.state.pop(old, None)
            new = tensor.detach().clone().requires_grad_(True)
            if stored is not None:
                stored["exp_avg"] = torch.zeros_like(new)
                stored["exp_avg_sq"] = torch.zeros_like(new)
                self.optimizer.state[new] = stored
            group["params"][0] = new
            tensors[name] = new
            break
        else:
            tensors[name] = tensor.detach().clone()
        self._set_tensors(tensors)

    def prune(self, keep: torch.Tensor) -> None:
        """Keep the gaussians where `keep` is True, in optimizer state too."""
        tensors = self.cloud.tensors()
        grouped = set()
        for group in self.optimizer.param_groups:
            name = group["name"]
            if name not in tensors:
                continue
            old = group["params"][0]
            stored = self.optimizer.state.pop(old, None)
            new = old.detach()[keep].clone().requires_grad_(True)
            if stored is not None:
                stored["exp_avg"] = stored["exp_avg"][keep]
                stored["exp_avg_sq"] = stored["exp_avg_sq"][keep]
                self.optimizer.state[new] = stored
            group["params"][0] = new
            tensors[name] = new
            grouped.add(name)
        for name in PARAMETER_NAMES:
            if name not in grouped:
                tensors[name] = tensors[name].detach()[keep].clone()
        self._set_tensors(tensors)
        self.grad_accum = self.grad_accum[keep]
        self.denom = self.denom[keep]

    def extend(self, extension: dict[str, torch.Tensor]) -> None:
        """Append gaussians; their Adam moments start at zero."""
        tensors = self.cloud.tensors()
        grouped = set()
        for group in self.optimizer.param_groups:
            name = group["name"]
            if name not in tensors:
                continue
            old = group["params"][0]
            added = extension[name].detach()
            stored = self.optimizer.state.pop(old, None)
            new = torch.cat([old.detach(), added], dim=0).requires_grad_(True)
            if stored is not None:
                stored["exp_avg"] = torch.cat([stored["exp_avg"], torch.zeros_like(added)], dim=0)
                stored["exp_avg_sq"] = torch.cat([stored["exp_avg_sq"], torch.zeros_like(added)], dim=0)
                self.optimizer.state[new] = stored
            group["params"][0] = new
            tensors[name] = new
            grouped.add(name)
        for name in PARAMETER_NAMES:
            if name not in grouped:
                tensors[name] = torch.cat([tensors[name].detach(), extension[name].detach()], dim=0)
        self._set_tensors(tensors)
        added_count = extension["X"].shape[0]
        self.grad_accum = torch.cat([self.grad_accum, torch.zeros(added_count, dtype=DTYPE)])
        self.denom = torch.cat([self.denom, torch.zeros(added_count, dtype=DTYPE)])


def network_shape(config: TrainConfig) -> NetworkShape:
    return NetworkShape(
        latent_channels=config.latent_channels,
        latent_height=config.latent_height,
        latent_width=config.latent_width,
        feature_channels=config.feature_channels,
        embed_dim=config.embed_dim,
        sh_coeffs=sh_coeff_count(config.sh_degree),
        pe_bands=config.pe_bands,
    )


def build_optimizer(config: TrainConfig, cloud: GaussianCloud, networks: FieldNetworks, extent: float) -> torch.optim.Adam:
    """Adam with one named group per trainable gaussian parameter.

    Parameters the variant excludes have `requires_grad` switched off and no
    group.
    """
    flags = config.flags
    rates = {
        "X": config.lr_position * extent,
        "q": config.lr_rotation,
        "s": config.lr_scale,
        "mu": config.lr_opacity,
        "sigma_u": config.lr_opacity,
        "sh": config.lr_sh,
        "e": config.lr_embedding,
    }
    active = {"X", "q", "s", "mu", "sh"}
    if flags.stochastic_opacity:
        active.add("sigma_u")
    if flags.neural_field:
        active.add("e")
    groups = []
    for name, tensor in cloud.tensors().items():
        tensor.requires_grad_(name in active)
        if name in active:
            groups.append({"params": [tensor], "lr": rates[name], "name": name})
    for parameter in networks.parameters():
        parameter.requires_grad_(flags.neural_field)
    if flags.neural_field:
        groups.append({"params": list(networks.parameters()), "lr": config.lr_networks, "name": NETWORK_GROUP})
    return torch.optim.Adam(groups, lr=0.0, eps=1e-15, foreach=False)


def initial_cloud(config: TrainConfig, extent: float, seed: int) -> GaussianCloud:
    """Random gaussians in a cube of side `extent`, sized by neighbour distance."""
    generator = torch.Generator()
    generator.manual_seed(seed)
    n = config.init_gaussians
    X = (torch.rand((n, 3), generator=generator, dtype=DTYPE) - 0.5) * extent
    distances = torch.cdist(X, X)
    distances.fill_diagonal_(float("inf"))
    k = min(3, max(n - 1, 1))
    nearest = distances.topk(k, dim=1, largest=False).values if n > 1 else torch.full((n, 1), extent / 10.0, dtype=DTYPE)
    mean_sq = (nearest**2).mean(dim=1).clamp_min(1e-7)
    s = torch.log(torch.sqrt(mean_sq)).unsqueeze(-1).repeat(1, 3)
    q = torch.zeros((n, 4), dtype=DTYPE)
    q[:, 0] = 1.0
    mu = torch.full((n,), float(torch.logit(torch.tensor(config.init_opacity, dtype=DTYPE))), dtype=DTYPE)
    sigma_u = softplus_inverse(torch.full((n,), max(config.init_sigma, 1e-6), dtype=DTYPE))
    sh = torch.zeros((n, sh_coeff_count(config.sh_degree)), dtype=DTYPE)
    e = 0.1 * torch.randn((n, config.embed_dim), generator=generator, dtype=DTYPE)
    return GaussianCloud(X=X, q=q, s=s, mu=mu, sigma_u=sigma_u, sh=sh, e=e)


def initialize_state(config: TrainConfig, cameras: list[Camera], scene_extent: float = 1.0, train_views: int | None = None) -> TrainState:
    """Fresh state; the learning-rate extent uses the first `train_views` cameras."""
    config.validate()
    train = cameras[:train_views] if train_views is not None else cameras
    extent = cameras_extent(train) if len(train) > 1 else 1.0
    cloud = initial_cloud(config, scene_extent, derive_seed(config.seed, 0xC1))
    networks = FieldNetworks(network_shape(config), seed=derive_seed(config.seed, 0x4E), zero_residual=config.zero_residual)
    optimizer = build_optimizer(config, cloud, networks, extent)
    generator = torch.Generator()
    generator.manual_seed(derive_seed(config.seed, 0x7A))
    bank = LatentQueueBank(config.styles + 1, config.queue_capacity)
    state = TrainState(config, cloud, networks, optimizer, bank, generator, cameras, extent)
    state.reset_densification_stats()
    return state


def _optimizer_tensors(state: TrainState) -> dict[str, torch.Tensor]:
    result: dict[str, torch.Tensor] = {}
    for group in state.optimizer.param_groups:
        for index, parameter in enumerate(group["params"]):
            stored = state.optimizer.state.get(parameter)
            if not stored:
                continue
            prefix = f"adam.{group['name']}.{index}"
            result[f"{prefix}.step"] = torch.tensor([float(stored["step"])], dtype=DTYPE)
            result[f"{prefix}.exp_avg"] = stored["exp_avg"]
            result[f"{prefix}.exp_avg_sq"] = stored["exp_avg_sq"]
    return result


def save_checkpoint(path: PathLike, state: TrainState) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    write_scene(root / SCENE_FILE, state.cloud)
    write_tensor_archive(root / NETWORKS_FILE, {name: p.detach() for name, p in state.networks.named_parameters()})
    blob: dict[str, torch.Tensor] = {
        "meta.iteration": torch.tensor([float(state.iteration)], dtype=DTYPE),
        "meta.extent": torch.tensor([state.extent], dtype=DTYPE),
        "rng.train": state.generator.get_state().to(DTYPE),
        "densify.grad_accum": state.grad_accum,
        "densify.denom": state.denom,
        "window": state.window.as_tensor(),
    }
    blob.update(_optimizer_tensors(state))
    blob.update(state.bank.state_tensors())
    write_tensor_archive(root / OPTIMIZER_FILE, blob)
    write_config(root / CONFIG_FILE, state.config)
    write_camera_set(root / CAMERAS_FILE, state.cameras)
    lines = [MetricsRow.header()] + [row.to_csv() for row in state.metrics]
    (root / METRICS_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("saved checkpoint at iteration %d to %s", state.iteration, root)
    return root


def read_metrics(path: PathLike) -> list[MetricsRow]:
    rows = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        if not line.strip():
            continue
        iteration, rec, contra, ucn, psnr = line.split(",")
        rows.append(MetricsRow(int(iteration), float(rec), float(contra), float(ucn), float(psnr)))
    return rows


def load_checkpoint(path: PathLike) -> TrainState:
    """Rebuild a TrainState that continues exactly where `save_checkpoint` left off."""
    root = Path(path)
    if not (root / SCENE_FILE).is_file():
        raise ValidationError(f"{root} is not a checkpoint directory (missing {SCENE_FILE})")
    config = load_config(root / CONFIG_FILE)
    cloud = read_scene(root / SCENE_FILE)
    cameras = read_camera_set(root / CAMERAS_FILE)
    networks = FieldNetworks(network_shape(config), seed=derive_seed(config.seed, 0x4E), zero_residual=config.zero_residual)
    weights = read_tensor_archive(root / NETWORKS_FILE)
    with torch.no_grad():
        for name, parameter in networks.named_parameters():
            if name not in weights:
                raise FormatError(str(root / NETWORKS_FILE), 0, f"missing tensor {name!r}")
            parameter.copy_(weights[name].reshape(parameter.shape))
    blob = read_tensor_archive(root / OPTIMIZER_FILE)
    extent = float(blob["meta.extent"][0])
    optimizer = build_optimizer(config, cloud, networks, extent)
    for group in optimizer.param_groups:
        for index, parameter in enumerate(group["params"]):
            prefix = f"adam.{group['name']}.{index}"
            if f"{prefix}.step" not in blob:
                continue
            optimizer.state[parameter] = {
                "step": torch.tensor(float(blob[f"{prefix}.step"][0])),
                "exp_avg": blob[f"{prefix}.exp_avg"].clone(),
                "exp_avg_sq": blob[f"{prefix}.exp_avg_sq"].clone(),
            }
    generator = torch.Generator()
    generator.set_state(blob["rng.train"].to(torch.uint8))
    bank = LatentQueueBank.from_state_tensors(blob)
    state = TrainState(
        config,
        cloud,
        networks,
        optimizer,
        bank,
        generator,
        cameras,
        extent,
        iteration=int(blob["meta.iteration"][0]),
        grad_accum=blob["densify.grad_accum"].clone(),
        denom=blob["densify.denom"].clone(),
        window=MetricWindow.from_tensor(blob["window"]),
        metrics=read_metrics(root / METRICS_FILE),
    )
    state.update_learning_rate()
    return state

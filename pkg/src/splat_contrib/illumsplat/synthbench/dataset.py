"""Multi-style synthetic datasets and their directory layout.

A dataset directory holds::

    cameras.txt          train cameras first, then test cameras
    gt.scene             ground-truth gaussians
    img_{j}_{m}.ppm      view j rendered and restyled with style m
    clean/img_{k}.ppm    unstyled renders of an unrelated scene
    manifest.txt         sizes, style parameters and image tags
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import torch

from ..errors import ValidationError
from ..internal import derive_seed
from ..models import Base
from ..rasterizer import DeterministicMean, render_image
from ..scene import (
    Camera,
    GaussianCloud,
    orbit_cameras,
    read_camera_set,
    read_image,
    read_scene,
    write_camera_set,
    write_image,
    write_scene,
)
from .scenes import (
    FOCAL_PER_WIDTH,
    ORBIT_HEIGHT,
    ORBIT_RADIUS,
    SceneSpec,
    make_scene,
    test_cameras,
    train_cameras,
)
from .styles import StyleTransform, apply_style, random_styles

logger = logging.getLogger(__name__)

IMAGE_MAXVAL = 65535
CLEAN_DIR = "clean"


@dataclass
class SynthConfig(Base):
    """Parameters of a generated dataset, also stored as manifest keys."""

    seed: int = 0
    gaussians: int = 200
    views: int = 24
    test_views: int = 4
    styles: int = 3
    width: int = 64
    height: int = 64
    clean_images: int = 8
    jitter: float = 0.05
    extent: float = 1.0
    sh_degree: int = 3


@dataclass
class ImageTag:
    view: int
    style: int
    split: str

    @property
    def filename(self) -> str:
        return f"img_{self.view}_{self.style}.ppm"


@dataclass
class SynthDataset:
    config: SynthConfig
    scene: GaussianCloud
    cameras: list[Camera]
    """Train cameras followed by test cameras."""
    styles: list[StyleTransform]
    images: dict[tuple[int, int], torch.Tensor]
    """(view, style) -> (H, W, 3) image."""
    clean_images: list[torch.Tensor] = field(default_factory=list)

    @property
    def style_count(self) -> int:
        """Number of style groups, identity included (M + 1)."""
        return len(self.styles)

    def split_of(self, view: int) -> str:
        return "train" if view < self.config.views else "test"

    def views(self, split: str) -> list[int]:
        if split not in ("train", "test"):
            raise ValidationError(f"unknown split {split!r}, expected 'train' or 'test'")
        return [j for j in range(len(self.cameras)) if self.split_of(j) == split]

    def tags(self) -> Iterator[ImageTag]:
        for view in range(len(self.cameras)):
            for style in range(self.style_count):
                yield ImageTag(view, style, self.split_of(view))

    def image(self, view: int, style: int) -> torch.Tensor:
        try:
            return self.images[(view, style)]
        except KeyError:
            raise ValidationError(f"dataset has no image for view {view} style {style}") from None


def make_dataset(
    scene: GaussianCloud,
    cameras: list[Camera],
    styles: list[StyleTransform],
    seed: int,
    config: SynthConfig | None = None,
    clean_images: list[torch.Tensor] | None = None,
) -> SynthDataset:
    """Render every camera and restyle it with every style.

    image(j, m) = clamp(gain_m * gt_j * (1 + J_jm) + bias_m) where J_jm is a
    smooth field seeded by (seed, j, m).
    """
    if not styles or not styles[0].is_identity:
        raise ValidationError("style 0 must be the identity transform")
    if config is None:
        config = SynthConfig(seed=seed, gaussians=len(scene), views=len(cameras), test_views=0, styles=len(styles) - 1)
    images: dict[tuple[int, int], torch.Tensor] = {}
    for view, cam in enumerate(cameras):
        gt = render_image(scene, cam, mode=DeterministicMean())
        for style in styles:
            images[(view, style.style_id)] = apply_style(gt, style, seed, view)
    return SynthDataset(config, scene, cameras, styles, images, clean_images or [])


def make_default_dataset(config: SynthConfig) -> SynthDataset:
    """Scene, orbit cameras, random styles and a clean image pool from `config`."""
    spec = SceneSpec(count=config.gaussians, extent=config.extent, sh_degree=config.sh_degree)
    scene = make_scene(spec, derive_seed(config.seed, 1))
    cameras = train_cameras(config.views, config.width, config.height)
    cameras += test_cameras(config.test_views, config.width, config.height, config.views)
    styles = random_styles(config.styles, derive_seed(config.seed, 2), config.jitter)
    clean = make_clean_images(config)
    logger.info(
        "generated %d gaussians, %d cameras, %d style groups, %d clean images",
        len(scene),
        len(cameras),
        len(styles),
        len(clean),
    )
    return make_dataset(scene, cameras, styles, derive_seed(config.seed, 3), config, clean)


def make_clean_images(config: SynthConfig) -> list[torch.Tensor]:
    """Unstyled renders of an unrelated scene, for the clean-latent pool."""
    if config.clean_images == 0:
        return []
    spec = SceneSpec(count=config.gaussians, extent=config.extent, sh_degree=config.sh_degree)
    scene = make_scene(spec, derive_seed(config.seed, 4))
    cameras = orbit_cameras(
        config.clean_images,
        ORBIT_RADIUS,
        ORBIT_HEIGHT,
        config.width,
        config.height,
        FOCAL_PER_WIDTH * config.width,
    )
    return [render_image(scene, cam, mode=DeterministicMean()) for cam in cameras]


def write_dataset(path: str | Path, dataset: SynthDataset) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    write_camera_set(root / "cameras.txt", dataset.cameras)
    write_scene(root / "gt.scene", dataset.scene)
    lines = ["# illumsplat synthetic dataset"]
    for key, value in dataset.config.as_dict().items():
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    lines.extend(style.describe() for style in dataset.styles)
    for tag in dataset.tags():
        write_image(root / tag.filename, dataset.images[(tag.view, tag.style)], IMAGE_MAXVAL)
        lines.append(f"image {tag.filename} view {tag.view} style {tag.style} split {tag.split}")
    clean_dir = root / CLEAN_DIR
    clean_dir.mkdir(exist_ok=True)
    for index, image in enumerate(dataset.clean_images):
        write_image(clean_dir / f"img_{index}.ppm", image, IMAGE_MAXVAL)
    (root / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("wrote dataset with %d images to %s", len(dataset.images), root)


def read_dataset(path: str | Path) -> SynthDataset:
    """Load a dataset directory written by `write_dataset`.

    Raises:
        ValidationError: when the manifest, cameras and images disagree.
    """
    root = Path(path)
    manifest = root / "manifest.txt"
    if not manifest.is_file():
        raise ValidationError(f"{root} is not a dataset directory (missing manifest.txt)")
    values: dict[str, str] = {}
    styles: list[StyleTransform] = []
    tags: list[ImageTag] = []
    for raw in manifest.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("style "):
            styles.append(StyleTransform.parse(line))
        elif line.startswith("image "):
            tokens = line.split()
            if len(tokens) != 8:
                raise ValidationError(f"malformed image line: {line!r}")
            tags.append(ImageTag(view=int(tokens[3]), style=int(tokens[5]), split=tokens[7]))
        elif "=" in line:
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        else:
            raise ValidationError(f"malformed manifest line: {line!r}")
    config = SynthConfig.from_mapping(values)
    cameras = read_camera_set(root / "cameras.txt")
    if len(cameras) != config.views + config.test_views:
        raise ValidationError(
            f"manifest declares {config.views} + {config.test_views} cameras, cameras.txt has {len(cameras)}"
        )
    if len(styles) != config.styles + 1:
        raise ValidationError(f"manifest declares {config.styles + 1} style groups, found {len(styles)}")
    images = {(tag.view, tag.style): read_image(root / tag.filename) for tag in tags}
    expected = len(cameras) * len(styles)
    if len(images) != expected:
        raise ValidationError(f"expected {expected} images, manifest lists {len(images)}")
    clean_dir = root / CLEAN_DIR
    clean = [read_image(clean_dir / f"img_{k}.ppm") for k in range(config.clean_images)]
    scene = read_scene(root / "gt.scene")
    return SynthDataset(config, scene, cameras, styles, images, clean)

from .dataset import (
    ImageTag,
    SynthConfig,
    SynthDataset,
    make_dataset,
    make_default_dataset,
    read_dataset,
    write_dataset,
)
from .metrics import PSNR_IDENTICAL, psnr, ssim, ssim_tensor
from .scenes import SceneSpec, coverage, make_scene, random_cloud, test_cameras, train_cameras
from .styles import StyleTransform, apply_style, jitter_field, random_styles

__all__ = [
    "PSNR_IDENTICAL",
    "ImageTag",
    "SceneSpec",
    "StyleTransform",
    "SynthConfig",
    "SynthDataset",
    "apply_style",
    "coverage",
    "jitter_field",
    "make_dataset",
    "make_default_dataset",
    "make_scene",
    "psnr",
    "random_cloud",
    "random_styles",
    "read_dataset",
    "ssim",
    "ssim_tensor",
    "test_cameras",
    "train_cameras",
    "write_dataset",
]

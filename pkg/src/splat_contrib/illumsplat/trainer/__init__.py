from .config import (
    LATENT_KINDS,
    VARIANTS,
    TrainConfig,
    VariantFlags,
    exponential_lr,
    format_config,
    load_config,
    parse_config,
    write_config,
)
from .density import DensifyReport, densify_and_prune, inference_opacity, reset_opacity
from .loop import (
    Batch,
    StepResult,
    TrainResult,
    appearance,
    evaluate,
    latent_from_image,
    latent_from_queue,
    latent_from_seed,
    render_view,
    run_training,
    sample_batch,
    train_step,
)
from .losses import reconstruction_loss, uncertainty_reg_loss
from .state import TrainState, cameras_extent, initialize_state, load_checkpoint, save_checkpoint

__all__ = [
    "LATENT_KINDS",
    "VARIANTS",
    "Batch",
    "DensifyReport",
    "StepResult",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "VariantFlags",
    "appearance",
    "cameras_extent",
    "densify_and_prune",
    "evaluate",
    "exponential_lr",
    "format_config",
    "inference_opacity",
    "initialize_state",
    "latent_from_image",
    "latent_from_queue",
    "latent_from_seed",
    "load_checkpoint",
    "load_config",
    "parse_config",
    "reconstruction_loss",
    "render_view",
    "reset_opacity",
    "run_training",
    "sample_batch",
    "save_checkpoint",
    "train_step",
    "uncertainty_reg_loss",
    "write_config",
]

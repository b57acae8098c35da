from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING

from ...errors import ValidationError
from ...illumination import FieldEvaluator, IlluminationLatent
from ...internal import tensor_digest
from ...rasterizer import SHColors
from ...scene import read_image, write_image
from ...trainer import (
    LATENT_KINDS,
    TrainState,
    appearance,
    latent_from_image,
    latent_from_queue,
    latent_from_seed,
    load_checkpoint,
    render_view,
)
from ..flags import CheckpointFlags, Flags

if TYPE_CHECKING:
    from ..utils import Subparser

logger = logging.getLogger(__name__)


def configure_render_cmd(parent: Subparser) -> None:
    parser = parent.add_parser("render", help="Render a checkpoint camera under one illumination latent")
    Flags.add_subcommand_options(parser)
    CheckpointFlags.ckpt.add_as_subcommand_option(parser)
    parser.add_argument("--camera", metavar="IDX", type=int, required=True, help="Checkpoint camera index")
    parser.add_argument(
        "--latent",
        metavar=("KIND", "VALUE"),
        nargs=2,
        default=None,
        help=f"Latent source: {' | '.join(LATENT_KINDS)} followed by an image path, seed or style",
    )
    parser.add_argument(
        "--cond-camera",
        metavar="IDX",
        type=int,
        default=0,
        help="Camera the latent's features are sampled from (default: 0)",
    )
    parser.add_argument("--out", metavar="IMG", type=str, required=True, help="Output PPM file")
    parser.add_argument("--maxval", metavar="MAXVAL", type=int, choices=[255, 65535], default=255, help="PPM maxval (default: 255)")


def _camera(state: TrainState, index: int, flag: str) -> int:
    if not 0 <= index < len(state.cameras):
        raise ValidationError(f"{flag} {index} does not exist, checkpoint has cameras 0..{len(state.cameras) - 1}")
    return index


def resolve_latent(state: TrainState, spec: list[str] | None, seed: int | None = None) -> IlluminationLatent | None:
    """Turn `--latent KIND VALUE` into a latent, None for variants without a field.

    Without `--latent`, a given `seed` stands for `--latent sample SEED`.
    """
    if not state.flags.neural_field:
        if spec is not None:
            logger.warning("variant %s has no neural field, ignoring --latent", state.config.variant)
        return None
    if spec is None:
        if seed is not None:
            return latent_from_seed(state, seed)
        raise ValidationError(f"variant {state.config.variant} needs --latent KIND VALUE or --seed")
    kind, value = spec
    if kind not in LATENT_KINDS:
        raise ValidationError(f"unknown latent kind {kind!r}, expected one of {', '.join(LATENT_KINDS)}")
    if kind == "from-image":
        return latent_from_image(state, read_image(value))
    try:
        number = int(value)
    except ValueError:
        raise ValidationError(f"latent {kind} expects an integer, got {value!r}") from None
    if kind == "sample":
        return latent_from_seed(state, number)
    if not 0 <= number < state.bank.styles:
        raise ValidationError(f"style {number} does not exist, checkpoint has styles 0..{state.bank.styles - 1}")
    return latent_from_queue(state, number)


def render_cmd(args: argparse.Namespace) -> None:
    state = load_checkpoint(CheckpointFlags.ckpt.get(args))
    cam = state.cameras[_camera(state, args.camera, "--camera")]
    cond_cam = state.cameras[_camera(state, args.cond_camera, "--cond-camera")]
    seed = Flags.seed.get(args)
    latent = resolve_latent(state, args.latent, seed)
    evaluator = FieldEvaluator(state.networks)
    colors = appearance(state, latent, cond_cam, evaluator)
    image = render_view(state, cam, colors)
    out = Path(args.out)
    write_image(out, image, args.maxval)
    coeffs = colors.coeffs if isinstance(colors, SHColors) else state.cloud.sh
    summary = {
        "out": str(out),
        "camera": args.camera,
        "latent": " ".join(args.latent) if args.latent is not None else None if latent is None else f"sample {seed}",
        "feature_hash": tensor_digest(coeffs)[:16],
        "field_evaluations": evaluator.evaluations,
    }
    print(json.dumps(summary, indent=2))

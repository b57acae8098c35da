from __future__ import annotations

import argparse
import json
from dataclasses import replace
from typing import TYPE_CHECKING

from ...synthbench import read_dataset
from ...trainer import VARIANTS, TrainConfig, load_config, run_training
from ..flags import CheckpointFlags, Flags

if TYPE_CHECKING:
    from ..utils import Subparser


def configure_train_cmd(parent: Subparser) -> None:
    parser = parent.add_parser("train", help="Train a scene on a synthetic dataset")
    Flags.add_subcommand_options(parser)
    CheckpointFlags.data.add_as_subcommand_option(parser)
    CheckpointFlags.progress.add_as_subcommand_option(parser)
    parser.add_argument("--out", metavar="DIR", type=str, required=True, help="Checkpoint directory to write")
    parser.add_argument("--config", metavar="FILE", type=str, default=None, help="Training config (key = value lines)")
    parser.add_argument(
        "--variant",
        metavar="VARIANT",
        type=str,
        choices=list(VARIANTS),
        default=None,
        help="Ablation variant, overrides the config file",
    )
    parser.add_argument("--iterations", metavar="N", type=int, default=None, help="Overrides the config file")


def train_cmd(args: argparse.Namespace) -> None:
    dataset = read_dataset(CheckpointFlags.data.get(args))
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = TrainConfig(styles=dataset.config.styles, sh_degree=dataset.config.sh_degree)
    overrides: dict[str, object] = {}
    seed = Flags.seed.get(args)
    if seed is not None:
        overrides["seed"] = seed
    if args.variant is not None:
        overrides["variant"] = args.variant
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    config = replace(config, **overrides).validate()
    result = run_training(config, dataset, args.out, progress=not CheckpointFlags.progress.get(args))
    summary: dict[str, object] = {
        "checkpoint": str(result.checkpoint),
        "variant": config.variant,
        "iterations": result.state.iteration,
        "gaussians": len(result.state.cloud),
        "metrics_rows": len(result.state.metrics),
    }
    if result.evaluation:
        summary["test_psnr"] = result.evaluation[-1].psnr
        summary["test_ssim"] = result.evaluation[-1].ssim
    print(json.dumps(summary, indent=2))

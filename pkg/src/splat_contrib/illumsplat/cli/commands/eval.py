from __future__ import annotations

import argparse
from dataclasses import replace
from typing import TYPE_CHECKING

from ...errors import ValidationError
from ...models import EvalRow
from ...synthbench import read_dataset
from ...trainer import LATENT_KINDS, evaluate, load_checkpoint
from ..flags import CheckpointFlags, Flags

if TYPE_CHECKING:
    from ..utils import Subparser


def configure_eval_cmd(parent: Subparser) -> None:
    parser = parent.add_parser("eval", help="Print PSNR and SSIM of a checkpoint on a dataset split")
    Flags.add_subcommand_options(parser)
    CheckpointFlags.ckpt.add_as_subcommand_option(parser)
    CheckpointFlags.data.add_as_subcommand_option(parser)
    parser.add_argument("--split", metavar="SPLIT", type=str, default="test", help="train or test (default: test)")
    parser.add_argument(
        "--latent",
        metavar="KIND",
        type=str,
        choices=list(LATENT_KINDS),
        default=None,
        help="Latent used per image, overrides the checkpoint config",
    )


def eval_cmd(args: argparse.Namespace) -> None:
    state = load_checkpoint(CheckpointFlags.ckpt.get(args))
    dataset = read_dataset(CheckpointFlags.data.get(args))
    if args.latent is not None:
        state.config = replace(state.config, eval_latent=args.latent)
    if not dataset.views(args.split):
        raise ValidationError(f"dataset has no {args.split} views")
    rows = evaluate(state, dataset, args.split, Flags.seed.get(args))
    print(EvalRow.header())
    for row in rows:
        print(row.to_csv())

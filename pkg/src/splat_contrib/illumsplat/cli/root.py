from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from ..errors import SplatError
from .commands.check_grad import check_grad_cmd, configure_check_grad_cmd
from .commands.eval import configure_eval_cmd, eval_cmd
from .commands.inspect import configure_inspect_cmd, inspect_cmd
from .commands.render import configure_render_cmd, render_cmd
from .commands.synth import configure_synth_cmd, synth_cmd
from .commands.train import configure_train_cmd, train_cmd
from .flags import Flags

logger = logging.getLogger("splat_contrib.illumsplat")


def parser() -> argparse.ArgumentParser:
    # Root parser
    parser = argparse.ArgumentParser(prog="illumsplat", description="Illumination-robust gaussian splatting")
    Flags.add_global_options(parser)
    subparsers = parser.add_subparsers(dest="command", required=True)
    # Synth command
    configure_synth_cmd(subparsers)
    # Train command
    configure_train_cmd(subparsers)
    # Render command
    configure_render_cmd(subparsers)
    # Eval command
    configure_eval_cmd(subparsers)
    # Check-grad command
    configure_check_grad_cmd(subparsers)
    # Inspect command
    configure_inspect_cmd(subparsers)
    # Return parser
    return parser


def run(args: Sequence[str] | None = None) -> None:
    parsed_args = parser().parse_args(args)
    logging.basicConfig(
        level=Flags.log_level.get(parsed_args),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if parsed_args.command == "synth":
            synth_cmd(args=parsed_args)
        elif parsed_args.command == "train":
            train_cmd(args=parsed_args)
        elif parsed_args.command == "render":
            render_cmd(args=parsed_args)
        elif parsed_args.command == "eval":
            eval_cmd(args=parsed_args)
        elif parsed_args.command == "check-grad":
            check_grad_cmd(args=parsed_args)
        elif parsed_args.command == "inspect":
            inspect_cmd(args=parsed_args)
        else:
            raise ValueError(f"Unknown command: {parsed_args.command}")
    except SplatError as err:
        logger.error("%s", err)
        sys.exit(err.exit_code)

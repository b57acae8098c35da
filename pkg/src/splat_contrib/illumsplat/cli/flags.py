from __future__ import annotations

import argparse

from .utils import Flag

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class Flags:
    log_level = Flag(
        name="log_level",
        short_option="-l",
        metavar="LEVEL",
        type=str.upper,
        help="Logging level",
        env="ILLUMSPLAT_LOG_LEVEL",
        default="INFO",
        choices=LOG_LEVELS,
    )

    seed = Flag(
        name="seed",
        metavar="SEED",
        type=int,
        help="Random seed",
        env="ILLUMSPLAT_SEED",
        default=None,
    )

    @classmethod
    def add_global_options(cls, parser: argparse.ArgumentParser) -> None:
        cls.log_level.add_as_global_option(parser)
        cls.seed.add_as_global_option(parser)

    @classmethod
    def add_subcommand_options(cls, parser: argparse.ArgumentParser) -> None:
        cls.log_level.add_as_subcommand_option(parser)
        cls.seed.add_as_subcommand_option(parser)


class CheckpointFlags:
    ckpt = Flag(
        name="ckpt",
        metavar="DIR",
        type=str,
        help="Checkpoint directory written by 'train'",
        env="ILLUMSPLAT_CKPT",
    )

    data = Flag(
        name="data",
        metavar="DIR",
        type=str,
        help="Dataset directory written by 'synth'",
        env="ILLUMSPLAT_DATA",
    )

    progress = Flag(
        name="no_progress",
        metavar="",
        type=bool,
        help="Hide the progress bar",
        default=False,
    )

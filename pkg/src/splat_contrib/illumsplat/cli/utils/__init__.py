import argparse

from typing_extensions import TypeAlias

from .flags import Flag, parse_size

Subparser: TypeAlias = "argparse._SubParsersAction[argparse.ArgumentParser]"  # pyright: ignore[reportPrivateUsage]
"""The object returned by `add_subparsers`, passed to every `configure_*_cmd`."""

__all__ = ["Flag", "Subparser", "parse_size"]

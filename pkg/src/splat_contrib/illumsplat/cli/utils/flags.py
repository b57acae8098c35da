from __future__ import annotations

import argparse
import os
from dataclasses import dataclass
from typing import Any, Callable, Generic, Sequence, TypeVar

from ...errors import ValidationError

T = TypeVar("T")


@dataclass
class Flag(Generic[T]):
    """A command line flag.

    This class is used to centralize the definition of command line
    flags and their default values. It is useful especially when
    the same flag is used both as a global option and as a subcommand
    option.

    It also allows to get the value of the flag from the command line
    arguments or from the environment variables.
    """

    name: str
    metavar: str
    type: Callable[[str], T]
    help: str
    env: str | None = None
    env_transform: Callable[[str], T] | None = None
    default: T = ...  # type: ignore
    alias: list[str] | None = None
    short_option: str | None = None
    choices: Sequence[str] | None = None

    @property
    def option(self) -> str:
        return f"--{self.name.replace('_', '-')}"

    def _kwargs(self, help: str) -> dict[str, Any]:
        kwargs: dict[str, Any] = {"help": help}
        if self.type is bool and self.default is False:
            kwargs["action"] = "store_true"
        else:
            kwargs["metavar"] = self.metavar
            kwargs["type"] = self.type
        if self.choices is not None:
            kwargs["choices"] = self.choices
        return kwargs

    def _args(self) -> list[str]:
        args: list[str] = []
        if self.alias:
            args.extend(self.alias)
        if self.short_option:
            args.append(self.short_option)
        return args

    def add_as_global_option(self, parser: argparse.ArgumentParser) -> None:
        """Add the argument to the parser."""
        if self.default is not ...:
            help = f"{self.help} (default: {self.default})"
        else:
            help = self.help
        parser.add_argument(self.option, *self._args(), **self._kwargs(help))

    def add_as_subcommand_option(self, parser: argparse.ArgumentParser) -> None:
        """Add the argument to the parser."""
        extras: list[str] = []
        if self.default is not ...:
            extras.append(f"(default: {self.default})")
        if self.env is not None:
            extras.append(f"(env: {self.env})")
        help = f"{self.help} {' '.join(extras)}" if extras else self.help
        parser.add_argument(self.option, *self._args(), dest=f"{self.name}_", **self._kwargs(help))

    def get(self, args: argparse.Namespace) -> T:
        """Get the value of the argument from the namespace.

        Raises:
            ValidationError: when the flag is neither given, set in the
                environment, nor has a default.
        """
        local = getattr(args, f"{self.name}_", None)
        if local is not None and local is not False:
            return local
        value = getattr(args, self.name, None)
        if value is not None and value is not False:
            return value
        if self.env is not None:
            value = os.environ.get(self.env, None)
            if value is not None:
                if self.env_transform is not None:
                    return self.env_transform(value)
                return self.type(value)
        if self.default is not ...:
            return self.default
        raise ValidationError(f"missing argument: {self.option}")


def parse_size(value: str) -> tuple[int, int]:
    """Parse an image size written WIDTHxHEIGHT."""
    try:
        width, height = (int(part) for part in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size {value!r}, expected WIDTHxHEIGHT") from None
    if width <= 0 or height <= 0:
        raise argparse.ArgumentTypeError(f"invalid size {value!r}, both sides must be positive")
    return width, height

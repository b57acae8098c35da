from __future__ import annotations


class SplatError(Exception):
    """Base class of every error raised by illumsplat.

    The `exit_code` is the process exit status used by the command line
    when the error escapes a command.
    """

    exit_code: int = 1


class NumericDomainError(SplatError, ArithmeticError):
    """Raised when a value leaves the finite domain (NaN or Inf)."""

    def __init__(self, what: str, value: object = None) -> None:
        message = f"non-finite value in {what}"
        if value is not None:
            message += f": {value!r}"
        super().__init__(message)
        self.what = what
        self.value = value


class ConvergenceError(SplatError):
    """Raised when a loss term becomes non-finite during training."""

    def __init__(self, term: str, iteration: int) -> None:
        super().__init__(f"loss term '{term}' is not finite at iteration {iteration}")
        self.term = term
        self.iteration = iteration


class GradientCheckError(SplatError):
    """Raised when an analytic gradient disagrees with finite differences."""

    def __init__(self, parameter: str, max_abs_error: float, max_rel_error: float) -> None:
        super().__init__(
            f"gradient mismatch on '{parameter}' "
            f"(max abs error {max_abs_error:.3e}, max rel error {max_rel_error:.3e})"
        )
        self.parameter = parameter
        self.max_abs_error = max_abs_error
        self.max_rel_error = max_rel_error


class ShapeError(SplatError, ValueError):
    """Raised when a tensor does not have the expected shape."""

    exit_code = 2


class ContractError(SplatError):
    """Raised when a caller breaks the precondition of an operation."""

    exit_code = 2


class ValidationError(SplatError, ValueError):
    """Raised when user supplied data fails validation."""

    exit_code = 2


class ConfigError(ValidationError):
    """Raised when a configuration key is unknown or has a bad value."""

    def __init__(self, key: str, reason: str = "unknown configuration key") -> None:
        super().__init__(f"{reason}: {key}")
        self.key = key
        self.reason = reason


class FormatError(SplatError):
    """Raised when a file does not follow its documented layout."""

    exit_code = 2

    def __init__(self, path: str, offset: int, description: str) -> None:
        super().__init__(f"{path}: byte {offset}: {description}")
        self.path = path
        self.offset = offset
        self.description = description


class UnsupportedVariantError(FormatError):
    """Raised when a file uses a known but unsupported variant of a format."""


class CulledBehindCamera(SplatError):
    """Raised when a primitive lies behind the camera near plane.

    This is not fatal: renderers skip such primitives.
    """

    def __init__(self, depth: float, z_near: float) -> None:
        super().__init__(f"primitive at view depth {depth:.6g} is behind z_near={z_near}")
        self.depth = depth
        self.z_near = z_near

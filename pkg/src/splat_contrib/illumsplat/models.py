from __future__ import annotations

from dataclasses import MISSING, dataclass, fields
from typing import Any, Mapping, TypeVar

from .errors import ConfigError

T = TypeVar("T", bound="Base")

_COERCE = {"int": int, "float": float, "str": str}


@dataclass
class Base:
    @classmethod
    def from_mapping(cls: type[T], values: Mapping[str, Any], strict: bool = False) -> T:
        """Read the class instance from a flat mapping.

        Values given as strings are coerced to the declared field type.
        Unknown keys are ignored ("open-world assumption") unless `strict`
        is set, in which case the first unknown key raises `ConfigError`.
        """
        known = {field.name: field for field in fields(cls)}
        params: dict[str, Any] = {}
        for key, value in values.items():
            field = known.get(key)
            if field is None:
                if strict:
                    raise ConfigError(key)
                continue
            params[key] = _coerce(key, str(field.type), value)
        for name, field in known.items():
            if name not in params and field.default is MISSING and field.default_factory is MISSING:
                raise ConfigError(name, "missing configuration key")
        return cls(**params)

    def as_dict(self) -> dict[str, Any]:
        """Return the object converted into a flat dict."""
        result: dict[str, Any] = {}
        for field in fields(self):
            val = getattr(self, field.name)
            if val is None:
                continue
            result[field.name] = val
        return result


def _coerce(key: str, type_name: str, value: Any) -> Any:
    if not isinstance(value, str):
        return value
    if type_name == "bool":
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(key, f"invalid boolean {value!r} for key")
    convert = _COERCE.get(type_name)
    if convert is None:
        return value
    try:
        return convert(value.strip())
    except ValueError:
        raise ConfigError(key, f"invalid {type_name} {value!r} for key") from None


@dataclass
class MetricsRow(Base):
    """One row of the training metrics log."""

    iteration: int
    """Iteration at the end of the logging window."""
    rec: float
    """Mean reconstruction loss over the window."""
    contra: float
    """Mean contrastive loss (including generator alignment) over the window."""
    ucn: float
    """Mean uncertainty regularizer (before weighting) over the window."""
    psnr: float
    """Mean PSNR of the training renders over the window."""

    @staticmethod
    def header() -> str:
        return "iteration,rec,contra,ucn,psnr"

    def to_csv(self) -> str:
        return f"{self.iteration},{self.rec!r},{self.contra!r},{self.ucn!r},{self.psnr!r}"


@dataclass
class EvalRow(Base):
    """One row of an evaluation table."""

    view: str
    style: str
    psnr: float
    ssim: float

    @staticmethod
    def header() -> str:
        return "view,style,psnr,ssim"

    def to_csv(self) -> str:
        return f"{self.view},{self.style},{self.psnr:.6f},{self.ssim:.6f}"

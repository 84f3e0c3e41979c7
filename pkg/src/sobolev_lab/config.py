"""Run configuration and its key-value text format.

A config file holds one ``key = value`` pair per line; ``#`` starts a comment.
Lists are comma separated.  CSV reports repeat the resolved configuration in
their ``# key = value`` header lines, so a report can be fed back as a config.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import DomainError
from .functions import COMPACT, DIRECTION_SHAPES, GAUSSIAN, TANGENT

OUTPUT_DIR_ENV = "SOBOLEV_LAB_OUTPUT_DIR"

KIND_ALIASES = {
    "gaussian": GAUSSIAN, "compact": COMPACT, "tangent": TANGENT,
    **{k: k for k in DIRECTION_SHAPES},
}


@dataclass(frozen=True)
class RunConfig:
    n: int = 2
    p: float = 1.5
    samples: int = 100
    eps_grid: tuple[float, ...] = (0.01, 0.1, 0.5)
    perturbation_kinds: tuple[str, ...] = (GAUSSIAN, COMPACT, TANGENT)
    resolution: int = 128
    seed: int = 42
    output_path: str = "certify.csv"
    format: str = "csv"
    constants: str = "stated"
    shrink_constants: float = 1.0
    ratios: bool = False
    projected: bool = False
    workers: int = 1

    def validate(self) -> "RunConfig":
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n}")
        if not (1 < self.p < self.n):
            raise DomainError("p must lie in (1,n)")
        if self.samples < 0:
            raise DomainError("samples must be >= 0")
        if self.resolution < 64 or self.resolution & (self.resolution - 1):
            raise DomainError("resolution must be a power of two >= 64")
        if self.seed < 0:
            raise DomainError("seed must be a nonnegative integer")
        if not self.eps_grid or not all(math.isfinite(e) for e in self.eps_grid):
            raise DomainError("eps grid must be a nonempty list of finite numbers")
        if not self.perturbation_kinds:
            raise DomainError("at least one perturbation kind is required")
        for k in self.perturbation_kinds:
            if k not in DIRECTION_SHAPES:
                raise DomainError(f"unknown perturbation kind {k!r}")
        if self.format not in ("csv", "json"):
            raise DomainError("format must be csv or json")
        if self.constants not in ("stated", "sound"):
            raise DomainError("constants must be 'stated' or 'sound'")
        if not self.shrink_constants > 0:
            raise DomainError("shrink factor must be positive")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        return self

    def resolved_output(self) -> Path:
        path = Path(self.output_path)
        base = os.environ.get(OUTPUT_DIR_ENV)
        if base and not path.is_absolute():
            path = Path(base) / path
        return path

    def to_lines(self) -> list[str]:
        return [f"{k} = {_format_value(v)}" for k, v in asdict(self).items()]


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"not a boolean: {text!r}")


def parse_value(key: str, text: str):
    key = key.replace("-", "_")
    if key not in _FIELD_TYPES:
        raise DomainError(f"unknown config key {key!r}")
    text = text.strip()
    try:
        if key in ("n", "samples", "resolution", "seed", "workers"):
            return int(text)
        if key in ("p", "shrink_constants"):
            return float(text)
        if key == "eps_grid":
            return tuple(float(t) for t in text.split(",") if t.strip())
        if key == "perturbation_kinds":
            return tuple(KIND_ALIASES.get(t.strip(), t.strip()) for t in text.split(",") if t.strip())
        if key in ("ratios", "projected"):
            return _parse_bool(text)
    except ValueError as exc:
        raise DomainError(f"bad value for {key}: {text!r}") from exc
    return text


def parse_config_text(text: str) -> dict:
    """Key-value pairs from a config file or from the header of a CSV report."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        header = line.startswith("#")
        if header:
            line = line.lstrip("#").strip()
        if not line:
            continue
        if "=" not in line:
            if header:
                continue
            # first table row of a report ends the header
            if "," in line:
                break
            raise DomainError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if header and key not in _FIELD_TYPES:
            continue
        out[key] = parse_value(key, value)
    return out


def load_config(path: str | os.PathLike, **overrides) -> RunConfig:
    values = parse_config_text(Path(path).read_text())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None}).validate()


__all__ = ["RunConfig", "load_config", "parse_config_text", "with_overrides", "OUTPUT_DIR_ENV"]

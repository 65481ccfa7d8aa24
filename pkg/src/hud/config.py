"""Run configuration with a flat ``key = value`` file format.

Keys are the :class:`RunConfig` field names; the matching command-line flag is
the same name with dashes (``batch_size`` <-> ``--batch-size``). Blank lines and
``#`` comments are ignored, and string values may be quoted.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .diffusion.schedule import DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_T


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str = ""
    out: str = "."
    endmembers: str = ""
    d: int = 0
    mode: str = "linear"
    patch_size: int = 32
    patch_count: int = 4096
    T: int = DEFAULT_T
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    steps: int = 2000
    batch_size: int = 8
    learning_rate: float = 1e-4
    base_width: int = 32
    depth: int = 2
    checkpoint_interval: int = 0
    seed: int = 0

    def validate(self) -> None:
        if not self.input:
            raise ConfigError("input dataset path is required")
        if not Path(self.input).is_file():
            raise FileNotFoundError(f"input dataset not found: {self.input}")
        if self.endmembers and not Path(self.endmembers).is_file():
            raise FileNotFoundError(f"endmember file not found: {self.endmembers}")
        if self.mode not in ("linear", "fcls"):
            raise ConfigError(f"mode must be 'linear' or 'fcls', got {self.mode!r}")
        for name in ("patch_size", "patch_count", "T", "batch_size", "base_width", "depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.steps < 0 or self.checkpoint_interval < 0 or self.d < 0 or self.seed < 0:
            raise ConfigError("steps, checkpoint_interval, d and seed must be >= 0")
        if self.patch_size % 2 ** (self.depth - 1):
            raise ConfigError(
                f"patch_size {self.patch_size} not divisible by 2**(depth-1) = {2 ** (self.depth - 1)}"
            )


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TYPES = {"int": int, "float": float, "str": str}


def _coerce(name: str, raw: str):
    kind = _TYPES[_FIELDS[name].type]
    if kind is str:
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
            return raw[1:-1]
        return raw
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for name, value in dataclasses.asdict(cfg).items():
        lines.append(f'{name} = "{value}"' if isinstance(value, str) else f"{name} = {value!r}")
    return "\n".join(lines) + "\n"


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then file values, then explicit flag values (``None`` means unset)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(merged) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**merged)

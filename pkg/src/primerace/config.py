"""Run configuration: a flat ``key = value`` file, overridable from the command line."""
from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import RaceError


class ConfigError(RaceError):
    pass


@dataclass(frozen=True)
class RunConfig:
    zero_dir: str = ""
    height: float = 0.0  # 0 means the per-modulus default from default_height
    n_samples: int = 1_000_000
    seed: int = 20240601
    c1: float = 0.5
    theorem_c: float = 5.0
    slack_log: float = 2.0
    slack_const: float = 5.0
    out_dir: str = "out"
    step: float = 0.05
    abs_error: float = 1e-8
    corr_alpha: float = 1.5  # max off-diagonal |correlation| <= corr_alpha / log q

    def __post_init__(self):
        for name in ("n_samples", "c1", "theorem_c", "slack_log", "slack_const", "step", "abs_error", "corr_alpha"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.height < 0:
            raise ConfigError("height must be nonnegative")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    def resolved_zero_dir(self) -> str:
        if self.zero_dir:
            return self.zero_dir
        from .lzeros import default_zero_dir

        return str(default_zero_dir())

    def height_for(self, q: int) -> float:
        return self.height if self.height > 0 else default_height(q)

    def replace(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw)

    def canonical(self) -> str:
        """Stable text form. Directories are excluded: they locate data, they do not change results."""
        items = []
        for f in dataclasses.fields(self):
            if f.name in ("zero_dir", "out_dir"):
                continue
            v = getattr(self, f.name)
            items.append(f"{f.name}={v!r}")
        return "\n".join(items)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def default_height(q: int) -> float:
    """Zero height used when none is configured: deep for tiny moduli, modest for large ones."""
    if q <= 8:
        return 1000.0
    if q <= 20:
        return 200.0
    return 100.0


_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _TYPES[name]
    try:
        if kind in ("int", int):
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


def parse_config(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        out[key] = _coerce(key, val)
    return out


def load_config(path: str | os.PathLike | None = None, **overrides) -> RunConfig:
    values = {}
    if path is not None:
        values.update(parse_config(Path(path).read_text()))
    env_dir = os.environ.get("RACE_ZERO_DIR")
    if env_dir and "zero_dir" not in values:
        values["zero_dir"] = env_dir
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)

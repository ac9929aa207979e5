"""Run configuration: defaults, INI files and command-line overrides.

Precedence is flags > file > defaults. A config file is flat ``key = value``
text under a ``[run]`` section; :meth:`RunConfig.to_ini` writes one back.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .education import SCHEMES, ZEROING
from .errors import InputError
from .network import CLIP_POLICIES
from .stability.kernel import Mode
from .stability.sweep import time_grid

SECTION = "run"
NULL_VARIANTS = ("uniform", "degree")
# Fields that never change outputs; they stay out of the hash.
RUNTIME_ONLY = ("out", "workers")


@dataclass(frozen=True)
class RunConfig:
    inputs: str = "."
    out: str = "run"
    seed: int = 0
    mode: str = "continuous"
    times: str = "1e-2:1e2:120"  # min:max:points, optional ":lin" suffix
    repeats: int = 100
    nulls: int = 4
    null_variant: str = "uniform"
    clip: str = "clip"
    x_mode: str = "national"
    alpha: float = 0.05
    weighting: str = "OLS,WLSI,WLSII"
    zeroing: str = "none,at10pct,at5pct"
    channels: str = "L,IO"
    max_k: int = 14
    min_size: int = 5
    education: bool = True
    education_weighted: bool = False
    top_fraction: float = 0.02
    workers: int = 1

    def validate(self) -> "RunConfig":
        if self.mode not in (m.value for m in Mode):
            _bad("mode", self.mode)
        self.time_grid()
        if self.repeats < 2:
            raise InputError("repeats must be at least 2")
        if self.nulls < 0:
            raise InputError("nulls must be nonnegative")
        if self.null_variant not in NULL_VARIANTS:
            _bad("null_variant", self.null_variant)
        if self.clip not in CLIP_POLICIES:
            _bad("clip", self.clip)
        if self.x_mode not in ("national", "mean"):
            _bad("x_mode", self.x_mode)
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)")
        for s in self.schemes:
            if s not in SCHEMES:
                _bad("weighting", s)
        for z in self.zeroings:
            if z not in ZEROING:
                _bad("zeroing", z)
        if not self.channel_list or any(c not in ("L", "IO", "K") for c in self.channel_list):
            _bad("channels", self.channels)
        if self.max_k < 2 or self.min_size < 1 or self.workers < 1:
            raise InputError("max_k >= 2, min_size >= 1 and workers >= 1 are required")
        if not 0 < self.top_fraction <= 1:
            raise InputError("top_fraction must lie in (0, 1]")
        return self

    @property
    def schemes(self) -> list[str]:
        return _split(self.weighting)

    @property
    def zeroings(self) -> list[str]:
        return _split(self.zeroing)

    @property
    def channel_list(self) -> list[str]:
        return _split(self.channels)

    def time_grid(self) -> np.ndarray:
        parts = self.times.split(":")
        try:
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("lin", "log")):
                raise ValueError
            t_min, t_max, points = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise InputError(f"bad time grid {self.times!r}; expected min:max:points[:lin]") from None
        log_spacing = len(parts) == 3 or parts[3] == "log"
        return time_grid(t_min, t_max, points, log_spacing, self.mode)

    # ------------------------------------------------------------ persistence

    def replay_dict(self) -> dict:
        d = asdict(self)
        for k in RUNTIME_ONLY:
            d.pop(k)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.replay_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_ini(self, runtime: bool = True) -> str:
        """INI text; ``runtime=False`` leaves out settings that do not affect outputs."""
        lines = [f"[{SECTION}]"]
        for f in fields(self):
            if not runtime and f.name in RUNTIME_ONLY:
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_file(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"missing config file {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise InputError(f"{path}: {exc}") from None
        if not parser.has_section(SECTION):
            raise InputError(f"{path}: no [{SECTION}] section")
        return (base or cls()).override(dict(parser.items(SECTION)), source=str(path))

    def override(self, values: dict, source: str = "flags") -> "RunConfig":
        """Copy with string or typed values coerced onto the field types."""
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            if raw is None:
                continue
            key = key.replace("-", "_")
            if key not in types:
                raise InputError(f"{source}: unknown setting {key!r}")
            changes[key] = _coerce(key, types[key], raw, source)
        return replace(self, **changes)


def _coerce(key, kind, raw, source):
    if not isinstance(raw, str):
        return raw
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
    except ValueError:
        raise InputError(f"{source}: bad value {raw!r} for {key}") from None
    return raw.strip()


def _split(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _bad(key, value):
    raise InputError(f"bad value {value!r} for {key}")


def load_config(path=None, flags: dict | None = None) -> RunConfig:
    """Defaults, then the file (if any), then non-None flags."""
    cfg = RunConfig()
    if path is not None:
        cfg = RunConfig.from_file(path, cfg)
    return cfg.override(flags or {}).validate()

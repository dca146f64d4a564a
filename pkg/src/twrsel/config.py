"""Scheme and sweep configuration plus the flat ``key = value`` file format.

Config files hold one ``key = value`` per line; ``#`` starts a comment; list
values are comma separated.  Keys are exactly the field names of
:class:`SchemeConfig` and :class:`SweepSpec`.  Example::

    scheme     = pr-maxmin-rs
    layout     = 4, 4
    modulation = BPSK
    p          = 2
    upsilon    = auto
    snr_grid   = 0, 2, 4, 6
    seed       = 7
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path

from .core import ConfigurationError
from .modem import Constellation, make_constellation, optimize_upsilon, parse_modulation
from .phy import validate_layout
from .selection import SCHEMES

__all__ = [
    "SchemeConfig",
    "SweepSpec",
    "CSI_SCOPES",
    "load_config",
    "parse_config_text",
    "dump_config_text",
]

CSI_SCOPES = ("relay", "selection", "all")


@dataclass(frozen=True)
class SchemeConfig:
    """Everything that defines one link-level scheme, independent of SNR.

    ``csi_error_scope`` chooses where the corrupted CSI is consumed:
    ``selection`` (relay choice, rotation angle and beamformer; the default),
    ``relay`` (the relay/antenna choice only) or ``all`` (detectors use the
    estimates too).
    """

    scheme: str = "pr-maxmin-rs"
    layout: tuple[int, ...] = (1, 1)
    modulation: str = "BPSK"
    p: float = 1.0
    upsilon: float | str = "auto"
    delta2: float = 0.0
    sigma2: float = 1.0
    csi_error_scope: str = "selection"

    def __post_init__(self):
        object.__setattr__(self, "layout", validate_layout(self.layout))
        kind, M = parse_modulation(self.modulation)
        object.__setattr__(self, "modulation", kind if kind in ("BPSK", "QPSK") else f"{kind}({M})")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.p > 0:
            raise ConfigurationError(f"p must be > 0, got {self.p}")
        if self.delta2 < 0:
            raise ConfigurationError(f"delta2 must be >= 0, got {self.delta2}")
        if not self.sigma2 > 0:
            raise ConfigurationError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.csi_error_scope not in CSI_SCOPES:
            raise ConfigurationError(f"csi_error_scope must be one of {CSI_SCOPES}")
        ups = self.upsilon
        if isinstance(ups, str):
            if ups.strip().lower() != "auto":
                try:
                    ups = float(ups)
                except ValueError:
                    raise ConfigurationError(f"upsilon must be 'auto' or an angle, got {ups!r}") from None
            else:
                ups = "auto"
        elif not math.isfinite(ups):
            raise ConfigurationError("upsilon must be finite")
        object.__setattr__(self, "upsilon", ups if ups == "auto" else float(ups))

    @cached_property
    def constellation(self) -> Constellation:
        return make_constellation(self.modulation)

    @cached_property
    def upsilon_value(self) -> float:
        """The rotation angle actually used ('auto' resolved off-line)."""
        if self.upsilon == "auto":
            return optimize_upsilon(self.constellation)
        return float(self.upsilon)

    @property
    def uses_rotation(self) -> bool:
        return self.scheme != "maxmin-rs-noPR"

    def resolved(self) -> "SchemeConfig":
        return replace(self, upsilon=self.upsilon_value)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layout"] = list(self.layout)
        return d


@dataclass(frozen=True)
class SweepSpec:
    """Monte-Carlo sweep controls.

    ``chunk_trials`` fixes the unit of work; results depend only on the seed
    and chunk size, never on ``workers``.
    """

    snr_grid: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)
    min_errors: int = 100
    max_trials: int = 10_000_000
    seed: int = 0
    workers: int = 1
    chunk_trials: int = 50_000

    def __post_init__(self):
        grid = tuple(float(x) for x in self.snr_grid)
        if not grid:
            raise ConfigurationError("snr_grid must not be empty")
        object.__setattr__(self, "snr_grid", grid)
        if self.min_errors < 1:
            raise ConfigurationError("min_errors must be >= 1")
        if self.max_trials < self.min_errors:
            raise ConfigurationError("max_trials must be >= min_errors")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.chunk_trials < 1:
            raise ConfigurationError("chunk_trials must be >= 1")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_grid"] = list(self.snr_grid)
        return d


_SCHEME_KEYS = {f.name for f in fields(SchemeConfig)}
_SWEEP_KEYS = {f.name for f in fields(SweepSpec)}
_INT_KEYS = {"min_errors", "max_trials", "seed", "workers", "chunk_trials"}
_FLOAT_KEYS = {"p", "delta2", "sigma2"}
_LIST_KEYS = {"layout": int, "snr_grid": float}


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key in _LIST_KEYS:
        cast = _LIST_KEYS[key]
        items = [x for x in raw.replace("[", "").replace("]", "").split(",") if x.strip()]
        try:
            return tuple(cast(x) for x in items)
        except ValueError:
            raise ConfigurationError(f"bad value for {key}: {raw!r}") from None
    try:
        if key in _INT_KEYS:
            raw = raw.replace("_", "")
            if raw.lstrip("+-").isdigit():
                return int(raw)
            # accept 1e7 style counts
            val = float(raw)
            if not val.is_integer():
                raise ValueError
            return int(val)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> tuple[SchemeConfig, SweepSpec]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    scheme_kw, sweep_kw = {}, {}
    for key, raw in parser["config"].items():
        if key in _SCHEME_KEYS:
            scheme_kw[key] = _convert(key, raw)
        elif key in _SWEEP_KEYS:
            sweep_kw[key] = _convert(key, raw)
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    return SchemeConfig(**scheme_kw), SweepSpec(**sweep_kw)


def load_config(path) -> tuple[SchemeConfig, SweepSpec]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def dump_config_text(cfg: SchemeConfig, sweep: SweepSpec | None = None) -> str:
    lines = []
    for key, val in cfg.to_dict().items():
        if isinstance(val, list):
            val = ", ".join(str(v) for v in val)
        lines.append(f"{key} = {val}")
    if sweep is not None:
        for key, val in sweep.to_dict().items():
            if isinstance(val, list):
                val = ", ".join(repr(v) for v in val)
            lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"

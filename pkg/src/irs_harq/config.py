"""Strict YAML schema for sweep configurations.

Example::

    base:
      n_reflectors: 64      # default 64
      tx_power: 1.0         # default 1.0   (linear)
      noise_power: 1.0      # default 1.0   (linear)
      dist_sr: 1.0          # default 1.0
      dist_rd: 1.0          # default 1.0
      pathloss_exp: 2.0     # default 2.0
      rate: 1.0             # default 1.0   (bits/s/Hz)
      max_rounds: 1         # default 1
    axis: snr_db            # snr_db | n_reflectors | rounds | pathloss_exp (required)
    grid: {start: -10, stop: 30, step: 2}   # or an explicit list; default per axis
    engines: [analytic, mc_clt]             # default [analytic]
    mc:
      trials: 1000000       # default 10**6
      shards: 4             # default: number of CPUs
      seed: 0               # default 0
    target_pout: 0.001      # used by `gain`; default 1e-3
    output_path: results.csv  # default results.csv

Unknown keys anywhere are rejected.  On the ``snr_db`` axis the value is the
average SNR ``gamma_bar`` in dB; ``tx_power`` is rescaled so the link budget
hits it exactly.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import yaml

from .channel_model import SystemConfig
from .errors import DomainError

__all__ = [
    "AXES",
    "ENGINES",
    "MC_ENGINES",
    "ConfigError",
    "McSettings",
    "SweepSpec",
    "parse_config",
    "load_config",
    "dump_config",
]

AXES = ("snr_db", "n_reflectors", "rounds", "pathloss_exp")
ENGINES = ("analytic", "asymptotic", "mc_exact", "mc_clt")
MC_ENGINES = ("mc_exact", "mc_clt")
INTEGER_AXES = ("n_reflectors", "rounds")

DEFAULT_GRIDS = {
    "snr_db": tuple(float(v) for v in range(-10, 31, 2)),
    "n_reflectors": (16, 32, 64, 128, 256),
    "rounds": (1, 2, 3, 4),
    "pathloss_exp": tuple(round(2.0 + 0.1 * i, 10) for i in range(11)),
}

_BASE_KEYS = {f.name for f in dataclasses.fields(SystemConfig)}
_TOP_KEYS = {"base", "axis", "grid", "engines", "mc", "target_pout", "output_path"}
_MC_KEYS = {"trials", "shards", "seed"}
_RANGE_KEYS = {"start", "stop", "step"}


class ConfigError(ValueError):
    """Malformed or invalid configuration document."""


@dataclass(frozen=True)
class McSettings:
    trials: int = 10**6
    shards: int = field(default_factory=lambda: os.cpu_count() or 1)
    seed: int = 0


@dataclass(frozen=True)
class SweepSpec:
    base: SystemConfig
    axis: str
    grid: tuple
    engines: tuple[str, ...] = ("analytic",)
    mc: McSettings = field(default_factory=McSettings)
    target_pout: float = 1e-3
    output_path: str = "results.csv"

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ConfigError(f"axis: must be one of {AXES}, got {self.axis!r}")
        if not self.grid:
            raise ConfigError("grid: must not be empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid: values must be strictly increasing (no duplicates)")
        if not self.engines:
            raise ConfigError("engines: must not be empty")
        unknown = [e for e in self.engines if e not in ENGINES]
        if unknown:
            raise ConfigError(f"engines: unknown engine(s) {unknown}; expected a subset of {ENGINES}")
        if len(set(self.engines)) != len(self.engines):
            raise ConfigError("engines: duplicate entries")
        if not 0.0 < self.target_pout < 1.0:
            raise ConfigError(f"target_pout: must lie in (0, 1), got {self.target_pout!r}")

    def config_at(self, value) -> SystemConfig:
        """Base configuration with the swept parameter set to ``value``."""
        b = self.base
        if self.axis == "snr_db":
            loss = (b.dist_sr * b.dist_rd) ** b.pathloss_exp
            return dataclasses.replace(b, tx_power=10.0 ** (value / 10.0) * b.noise_power * loss)
        if self.axis == "n_reflectors":
            return dataclasses.replace(b, n_reflectors=int(value))
        if self.axis == "rounds":
            return dataclasses.replace(b, max_rounds=int(value))
        return dataclasses.replace(b, pathloss_exp=float(value))


# --- parsing


def _line_index(node, path=(), out=None) -> dict:
    """Map key paths to 1-based source lines from a composed YAML tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            sub = path + (k.value,)
            out[sub] = k.start_mark.line + 1
            _line_index(v, sub, out)
    return out


class _Reader:
    def __init__(self, lines: dict):
        self.lines = lines

    def fail(self, path: tuple, msg: str):
        where = ".".join(str(p) for p in path) or "<document>"
        line = self.lines.get(path)
        prefix = f"line {line}: " if line else ""
        raise ConfigError(f"{prefix}{where}: {msg}")

    def mapping(self, data, path: tuple, allowed: set) -> dict:
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.fail(path, "expected a mapping")
        extra = sorted(set(map(str, data)) - allowed)
        if extra:
            self.fail(path + (extra[0],), f"unknown key (allowed: {sorted(allowed)})")
        return data

    def number(self, value, path: tuple, integer: bool = False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            self.fail(path, "must be finite")
        if integer:
            if value != int(value):
                self.fail(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)


def _grid(reader: _Reader, data, axis: str) -> tuple:
    integer = axis in INTEGER_AXES
    if data is None:
        return DEFAULT_GRIDS[axis]
    if isinstance(data, dict):
        rng = reader.mapping(data, ("grid",), _RANGE_KEYS)
        missing = _RANGE_KEYS - set(rng)
        if missing:
            reader.fail(("grid",), f"range form needs keys {sorted(missing)}")
        start, stop, step = (reader.number(rng[k], ("grid", k)) for k in ("start", "stop", "step"))
        if step <= 0.0:
            reader.fail(("grid", "step"), "must be > 0")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 10) for i in range(max(count, 0))]
    elif isinstance(data, list):
        values = [reader.number(v, ("grid",)) for v in data]
    else:
        reader.fail(("grid",), "expected a list or a {start, stop, step} mapping")
    if integer:
        values = [reader.number(v, ("grid",), integer=True) for v in values]
    return tuple(values)


def parse_config(text: str) -> SweepSpec:
    """Parse and fully validate a YAML sweep document."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigError(f"{where}malformed YAML: {getattr(exc, 'problem', exc)}") from None

    reader = _Reader(_line_index(root) if root is not None else {})
    data = reader.mapping(data, (), _TOP_KEYS)
    if "axis" not in data:
        reader.fail(("axis",), "required key missing")
    axis = data["axis"]
    if axis not in AXES:
        reader.fail(("axis",), f"must be one of {AXES}, got {axis!r}")

    base_raw = reader.mapping(data.get("base"), ("base",), _BASE_KEYS)
    base_kwargs = {"n_reflectors": 64}
    for key, value in base_raw.items():
        base_kwargs[key] = reader.number(value, ("base", key), integer=key in ("n_reflectors", "max_rounds"))
    try:
        base = SystemConfig(**base_kwargs)
    except DomainError as exc:
        reader.fail(("base",), str(exc))

    mc_raw = reader.mapping(data.get("mc"), ("mc",), _MC_KEYS)
    mc_kwargs = {k: reader.number(v, ("mc", k), integer=True) for k, v in mc_raw.items()}
    mc = McSettings(**mc_kwargs)
    if mc.trials < 1000:
        reader.fail(("mc", "trials"), "must be >= 1000")
    if mc.shards < 1:
        reader.fail(("mc", "shards"), "must be >= 1")
    if not 0 <= mc.seed < 2**64:
        reader.fail(("mc", "seed"), "must be an unsigned 64-bit integer")

    engines = data.get("engines", ["analytic"])
    if not isinstance(engines, list) or not all(isinstance(e, str) for e in engines):
        reader.fail(("engines",), "expected a list of engine names")

    target = reader.number(data.get("target_pout", 1e-3), ("target_pout",))
    output_path = data.get("output_path", "results.csv")
    if not isinstance(output_path, str):
        reader.fail(("output_path",), "expected a string")

    try:
        return SweepSpec(
            base=base,
            axis=axis,
            grid=_grid(reader, data.get("grid"), axis),
            engines=tuple(engines),
            mc=mc,
            target_pout=target,
            output_path=output_path,
        )
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        reader.fail((key,), str(exc).split(":", 1)[1].strip())


def load_config(path) -> SweepSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(spec: SweepSpec) -> str:
    """Serialize ``spec`` so that ``parse_config(dump_config(spec)) == spec``."""
    doc = {
        "base": dataclasses.asdict(spec.base),
        "axis": spec.axis,
        "grid": list(spec.grid),
        "engines": list(spec.engines),
        "mc": dataclasses.asdict(spec.mc),
        "target_pout": spec.target_pout,
        "output_path": spec.output_path,
    }
    return yaml.safe_dump(doc, sort_keys=False)

"""JSON run configuration for the command-line tool.

One document per run.  Every section rejects unknown keys, and the model
objects are built at load time so their own invariants are checked before
any work starts.  All numbers are SI: seconds for durations, rate units for
rates.

Example::

    {
      "seed": 7,
      "horizon": 1e5,
      "bin_width": 1.0,
      "source": {
        "on":  {"shape": 1.5, "scale": 1.0},
        "off": {"shape": 1.5, "scale": 1.0},
        "rate": {"shape": 1.2, "scale": 1.0, "cutoff": 10.0}
      },
      "aggregate": {"n_sources": 32, "link_capacity": 1000.0}
    }
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .aggregate import AggregateConfig
from .distributions import BoundedParetoLaw, ParetoLaw
from .onoff import ConstantRate, SourceConfig
from .streams import MASK64

MODES = ("generate", "aggregate", "analyze", "validate", "report")
STARTS = ("renewal", "stationary")


class ConfigError(ValueError):
    pass


def _check_keys(section: str, data, allowed: set[str], required: set[str] = frozenset()):
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected a JSON object, got {type(data).__name__}")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(data)
    if missing:
        raise ConfigError(f"{section}: missing keys {sorted(missing)}")


def _number(section: str, key: str, value, positive: bool = False, allow_inf: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    v = float(value)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ConfigError(f"{section}.{key}: must be finite, got {value!r}")
    if positive and not v > 0:
        raise ConfigError(f"{section}.{key}: must be positive, got {value!r}")
    return v


def _integer(section: str, key: str, value, lo: int = 0, hi: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key}: expected an integer, got {value!r}")
    if value < lo or (hi is not None and value > hi):
        raise ConfigError(f"{section}.{key}: {value} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return value


def _duration_law(section: str, data) -> ParetoLaw:
    _check_keys(section, data, {"shape", "scale"}, {"shape", "scale"})
    try:
        return ParetoLaw(_number(section, "shape", data["shape"]), _number(section, "scale", data["scale"]),
                         duration=True)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _rate_law(data):
    section = "source.rate"
    if isinstance(data, dict) and "constant" in data:
        _check_keys(section, data, {"constant"})
        return ConstantRate(_number(section, "constant", data["constant"], positive=True))
    _check_keys(section, data, {"shape", "scale", "cutoff"}, {"shape", "scale", "cutoff"})
    try:
        return BoundedParetoLaw(_number(section, "shape", data["shape"]), _number(section, "scale", data["scale"]),
                                _number(section, "cutoff", data["cutoff"]))
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


@dataclass(frozen=True)
class AnalysisOptions:
    max_lag: int = 1000
    min_scale: int = 64
    spectral_fraction: float = 0.01
    hill_fraction: float = 0.01


@dataclass(frozen=True)
class RunConfig:
    mode: str | None = None
    seed: int = 0
    horizon: float = 1e5
    bin_width: float = 1.0
    burn_in: float = 0.0
    start: str = "renewal"
    workers: int = 1
    source: SourceConfig = field(default_factory=lambda: SourceConfig(
        ParetoLaw(1.5, 1.0, duration=True), ParetoLaw(1.5, 1.0, duration=True), BoundedParetoLaw(1.2, 1.0, 10.0)))
    n_sources: int = 1
    link_capacity: float = math.inf
    cutoffs: tuple[float, ...] | None = None
    marginal_samples: int = 10**6
    trace: str | None = None
    analysis: AnalysisOptions = AnalysisOptions()
    checks: tuple[str, ...] | None = None
    tolerances: dict = field(default_factory=dict)

    def source_config(self) -> SourceConfig:
        return SourceConfig(self.source.on_law, self.source.off_law, self.source.rate, seed=self.seed)

    def aggregate_config(self) -> AggregateConfig:
        return AggregateConfig(self.n_sources, self.source_config(), link_capacity=self.link_capacity,
                               master_seed=self.seed, cutoffs=self.cutoffs)

    def with_overrides(self, mode: str | None = None, seed: int | None = None) -> RunConfig:
        from dataclasses import replace

        if mode is not None and self.mode is not None and self.mode != mode:
            raise ConfigError(f"config mode {self.mode!r} does not match the {mode!r} command")
        out = replace(self, mode=mode or self.mode)
        if seed is not None:
            out = replace(out, seed=_integer("--seed", "seed", seed, 0, MASK64))
        return out


TOP_KEYS = {"mode", "seed", "horizon", "bin_width", "burn_in", "start", "workers", "source", "aggregate",
            "trace", "analysis", "checks", "tolerances"}


def parse_config(data) -> RunConfig:
    _check_keys("config", data, TOP_KEYS)
    kw = {}
    if "mode" in data:
        if data["mode"] not in MODES:
            raise ConfigError(f"config.mode: must be one of {MODES}, got {data['mode']!r}")
        kw["mode"] = data["mode"]
    if "seed" in data:
        kw["seed"] = _integer("config", "seed", data["seed"], 0, MASK64)
    for key in ("horizon", "bin_width"):
        if key in data:
            kw[key] = _number("config", key, data[key], positive=True)
    if "burn_in" in data:
        kw["burn_in"] = _number("config", "burn_in", data["burn_in"])
        if kw["burn_in"] < 0:
            raise ConfigError("config.burn_in: must be non-negative")
    if "start" in data:
        if data["start"] not in STARTS:
            raise ConfigError(f"config.start: must be one of {STARTS}, got {data['start']!r}")
        kw["start"] = data["start"]
    if "workers" in data:
        kw["workers"] = _integer("config", "workers", data["workers"], 1, 1024)
    if "source" in data:
        src = data["source"]
        _check_keys("source", src, {"on", "off", "rate"}, {"on", "off"})
        rate = _rate_law(src["rate"]) if "rate" in src else ConstantRate(1.0)
        try:
            kw["source"] = SourceConfig(_duration_law("source.on", src["on"]), _duration_law("source.off", src["off"]),
                                        rate)
        except ValueError as exc:
            raise ConfigError(f"source: {exc}") from None
    if "aggregate" in data:
        agg = data["aggregate"]
        _check_keys("aggregate", agg, {"n_sources", "link_capacity", "cutoffs", "marginal_samples"})
        if "n_sources" in agg:
            kw["n_sources"] = _integer("aggregate", "n_sources", agg["n_sources"], 1)
        if "link_capacity" in agg:
            kw["link_capacity"] = _number("aggregate", "link_capacity", agg["link_capacity"], positive=True,
                                          allow_inf=True)
        if agg.get("cutoffs") is not None:
            cut = agg["cutoffs"]
            if not isinstance(cut, list):
                raise ConfigError("aggregate.cutoffs: expected a list of numbers")
            kw["cutoffs"] = tuple(_number("aggregate", "cutoffs", c, positive=True) for c in cut)
        if "marginal_samples" in agg:
            kw["marginal_samples"] = _integer("aggregate", "marginal_samples", agg["marginal_samples"], 10**4)
    if "trace" in data:
        if not isinstance(data["trace"], str):
            raise ConfigError("config.trace: expected a path string")
        kw["trace"] = data["trace"]
    if "analysis" in data:
        an = data["analysis"]
        _check_keys("analysis", an, {"max_lag", "min_scale", "spectral_fraction", "hill_fraction"})
        opts = {}
        if "max_lag" in an:
            opts["max_lag"] = _integer("analysis", "max_lag", an["max_lag"], 1)
        if "min_scale" in an:
            opts["min_scale"] = _integer("analysis", "min_scale", an["min_scale"], 4)
        for key in ("spectral_fraction", "hill_fraction"):
            if key in an:
                v = _number("analysis", key, an[key], positive=True)
                if v >= 0.5:
                    raise ConfigError(f"analysis.{key}: must be below 0.5")
                opts[key] = v
        kw["analysis"] = AnalysisOptions(**opts)
    if "checks" in data:
        from .validation import CHECKS

        checks = data["checks"]
        if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
            raise ConfigError("config.checks: expected a list of check names")
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            raise ConfigError(f"config.checks: unknown checks {bad}; known: {sorted(CHECKS)}")
        kw["checks"] = tuple(checks)
    if "tolerances" in data:
        from .validation import CHECKS

        tol = data["tolerances"]
        _check_keys("tolerances", tol, set(CHECKS))
        kw["tolerances"] = {k: _number("tolerances", k, v) for k, v in tol.items()}
        if any(v < 0 for v in kw["tolerances"].values()):
            raise ConfigError("tolerances: scale factors must be non-negative")

    cfg = RunConfig(**kw)
    if cfg.bin_width > cfg.horizon:
        raise ConfigError(f"bin_width {cfg.bin_width} exceeds horizon {cfg.horizon}")
    try:
        cfg.aggregate_config()
    except ValueError as exc:
        raise ConfigError(f"aggregate: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a JSON config; IO errors propagate as ``OSError``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)

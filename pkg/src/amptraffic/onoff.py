"""A single On/Off source with Pareto durations.

The source starts an On period at ``t = 0``.  Epoch ``j`` is the tuple
``(S_j, X_j, Y_j, A_j)``: the On period ``[S_j, S_j + X_j)`` at rate ``A_j`` is
followed by an Off period of length ``Y_j``, and ``S_{j+1} = S_j + X_j + Y_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .distributions import (
    BoundedParetoLaw,
    ParetoLaw,
    _bpareto_sample_unchecked,
    _pareto_residual_unchecked,
    _pareto_sample_unchecked,
    bpareto_cdf,
    bpareto_mean,
    bpareto_pdf,
    pareto_mean,
)
from .streams import Purpose, open_uniform, substream

__all__ = [
    "ConstantRate",
    "SourceConfig",
    "RenewalTimeline",
    "BinnedTrace",
    "MixedMarginal",
    "generate_timeline",
    "rate_at",
    "bin_trace",
    "generate_trace",
    "theoretical_hurst",
    "single_source_marginal",
    "expected_load",
    "on_fraction",
]


@dataclass(frozen=True)
class ConstantRate:
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")


RateMode = Union[ConstantRate, BoundedParetoLaw]


@dataclass(frozen=True)
class SourceConfig:
    """Parameters of one source.

    ``rate`` is either :class:`ConstantRate` (every On period at ``c``) or a
    :class:`BoundedParetoLaw`, in which case a fresh rate is drawn for every
    On period.  ``stream`` selects the source's substream under ``seed`` so
    that several sources can share one master seed.
    """

    on_law: ParetoLaw
    off_law: ParetoLaw
    rate: RateMode = ConstantRate(1.0)
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        for name in ("on_law", "off_law"):
            law = getattr(self, name)
            if not isinstance(law, ParetoLaw):
                raise TypeError(f"{name} must be a ParetoLaw")
            if not (1.0 < law.shape < 2.0):
                raise ValueError(f"{name} shape must satisfy 1 < a < 2, got {law.shape}")
        if not isinstance(self.rate, (ConstantRate, BoundedParetoLaw)):
            raise TypeError("rate must be ConstantRate or BoundedParetoLaw")
        if not (0 <= self.seed < 1 << 64):
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def max_rate(self) -> float:
        return self.rate.rate if isinstance(self.rate, ConstantRate) else self.rate.cutoff

    @property
    def mean_rate(self) -> float:
        return self.rate.rate if isinstance(self.rate, ConstantRate) else bpareto_mean(self.rate)

    @property
    def cycle_mean(self) -> float:
        return pareto_mean(self.on_law) + pareto_mean(self.off_law)


@dataclass(frozen=True)
class RenewalTimeline:
    starts: np.ndarray
    on: np.ndarray
    off: np.ndarray
    rates: np.ndarray
    horizon: float

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def ends(self) -> np.ndarray:
        return self.starts + self.on

    def volume(self, t0: float = 0.0, t1: float | None = None) -> float:
        """Exact integral of the rate process over ``[t0, t1)``."""
        t1 = self.horizon if t1 is None else t1
        lo = np.clip(self.starts, t0, t1)
        hi = np.clip(self.ends, t0, t1)
        return float(np.sum(self.rates * (hi - lo)))


@dataclass(frozen=True)
class BinnedTrace:
    """Mean rate per bin on the grid ``origin + m * bin_width``."""

    bin_width: float
    values: np.ndarray
    origin: float = 0.0
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.values)

    @property
    def volume(self) -> float:
        return float(np.sum(self.values) * self.bin_width)


@dataclass(frozen=True)
class MixedMarginal:
    """Law with an atom at zero, a continuous density and optional extra atoms.

    ``point_masses`` holds ``(location, mass)`` pairs other than zero, e.g. the
    cutoff atom of the Bounded-Pareto rate law scaled by the On probability.
    """

    atom_at_zero: float
    density: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    point_masses: tuple[tuple[float, float], ...] = ()
    cdf: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def continuous_mass(self) -> float:
        lo, hi = self.support
        if hi <= lo:
            return 0.0
        val, _ = integrate.quad(lambda x: float(self.density(x)), lo, hi, limit=500,
                                epsabs=1e-12, epsrel=1e-12)
        return val

    def total_mass(self) -> float:
        return self.atom_at_zero + self.continuous_mass() + sum(m for _, m in self.point_masses)

    def mean(self) -> float:
        lo, hi = self.support
        cont = 0.0
        if hi > lo:
            cont, _ = integrate.quad(lambda x: x * float(self.density(x)), lo, hi, limit=500)
        return cont + sum(x * m for x, m in self.point_masses)


def _draw_epochs(config: SourceConfig, n: int, streams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    on_rng, off_rng, rate_rng = streams
    x = _pareto_sample_unchecked(config.on_law, open_uniform(on_rng, n))
    y = _pareto_sample_unchecked(config.off_law, open_uniform(off_rng, n))
    if isinstance(config.rate, ConstantRate):
        a = np.full(n, config.rate.rate)
    else:
        a = _bpareto_sample_unchecked(config.rate, open_uniform(rate_rng, n))
    return x, y, a


def _renewal_epochs(config: SourceConfig, horizon: float, s0: float):
    streams = tuple(substream(config.seed, config.stream, p) for p in (Purpose.ON, Purpose.OFF, Purpose.RATE))
    chunk = int(min(max((horizon - s0) / config.cycle_mean * 1.05 + 64, 64), 1 << 22))
    xs, ys, as_, ss = [], [], [], []
    s_next = s0
    while s_next < horizon:
        x, y, a = _draw_epochs(config, chunk, streams)
        # sequential running sum, so S[j+1] == S[j] + (X[j] + Y[j]) holds bitwise
        s = np.cumsum(np.concatenate(([s_next], x + y)))
        keep = int(np.searchsorted(s[:-1], horizon, side="left"))
        xs.append(x[:keep]); ys.append(y[:keep]); as_.append(a[:keep]); ss.append(s[:keep])
        if keep < chunk:
            break
        s_next = float(s[-1])
    if not ss:
        return (np.empty(0),) * 4
    return np.concatenate(ss), np.concatenate(xs), np.concatenate(ys), np.concatenate(as_)


def _stationary_first_epoch(config: SourceConfig) -> tuple[float, float, float]:
    rng = substream(config.seed, config.stream, Purpose.PHASE)
    u = open_uniform(rng, 4)
    if u[0] < on_fraction(config):
        x0 = float(_pareto_residual_unchecked(config.on_law, u[1:2])[0])
        y0 = float(_pareto_sample_unchecked(config.off_law, u[2:3])[0])
    else:
        x0 = 0.0
        y0 = float(_pareto_residual_unchecked(config.off_law, u[1:2])[0])
    if isinstance(config.rate, ConstantRate):
        a0 = config.rate.rate
    else:
        a0 = float(_bpareto_sample_unchecked(config.rate, u[3:4])[0])
    return x0, y0, a0


def generate_timeline(config: SourceConfig, horizon: float, start: str = "renewal") -> RenewalTimeline:
    """Draw epochs until the next regeneration point reaches ``horizon``.

    ``start="renewal"`` begins a fresh On period at ``t = 0``.  With
    ``start="stationary"`` epoch 0 is instead drawn from the stationary law:
    the source is On with probability ``mu1/(mu0+mu1)`` and the period
    covering ``t = 0`` has the residual-life law; if the source starts Off,
    epoch 0 has a zero-length On period.  Only that first epoch may be shorter
    than the duration scale.

    Durations and rates come from independent substreams, so the timeline
    for a shorter horizon is a prefix of the one for a longer horizon.
    """
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if start == "renewal":
        s, x, y, a = _renewal_epochs(config, horizon, 0.0)
    elif start == "stationary":
        x0, y0, a0 = _stationary_first_epoch(config)
        s, x, y, a = _renewal_epochs(config, horizon, x0 + y0)
        s = np.concatenate(([0.0], s)); x = np.concatenate(([x0], x))
        y = np.concatenate(([y0], y)); a = np.concatenate(([a0], a))
    else:
        raise ValueError(f"start must be 'renewal' or 'stationary', got {start!r}")
    return RenewalTimeline(starts=s, on=x, off=y, rates=a, horizon=float(horizon))


def rate_at(timeline: RenewalTimeline, t):
    """Instantaneous rate; On intervals are half-open ``[S_j, S_j + X_j)``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr >= timeline.horizon)) or not np.all(np.isfinite(t_arr)):
        raise ValueError(f"t must lie in [0, {timeline.horizon})")
    j = np.searchsorted(timeline.starts, t_arr, side="right") - 1
    inside = (j >= 0) & (t_arr < timeline.starts[np.maximum(j, 0)] + timeline.on[np.maximum(j, 0)])
    out = np.where(inside, timeline.rates[np.maximum(j, 0)], 0.0)
    return float(out) if t_arr.ndim == 0 else out


def _bin_intervals(s, e, a, n: int, delta: float, widths: np.ndarray) -> np.ndarray:
    """Mean rate per bin of piecewise-constant intervals ``[s, e)`` (origin 0).

    Intervals may overlap; contributions add.  Every interval adds its
    partial volume to its first and last bin and a constant rate to the bins
    strictly between; when both ends share a bin the three terms still sum to
    ``a * (e - s)``, so no case split is needed.
    """
    b0 = np.minimum((s / delta).astype(np.int64), n - 1)
    b1 = np.minimum((e / delta).astype(np.int64), n)
    # a float edge may land one bin off; nudge so b0*delta <= s < (b0+1)*delta
    b0 -= b0 * delta > s
    b1 -= b1 * delta > e

    vol = np.bincount(b0, weights=a * ((b0 + 1) * delta - s), minlength=n + 1)
    vol += np.bincount(b1, weights=a * (e - b1 * delta), minlength=n + 1)
    diff = np.bincount(b0 + 1, weights=a, minlength=n + 2)
    diff -= np.bincount(b1, weights=a, minlength=n + 2)
    covered = np.cumsum(diff)[:n]
    # overlapping sources can leave ~1e-16 residue in the running sum
    return np.maximum((covered * delta + vol[:n]) / widths, 0.0)


def _grid(span: float, delta: float) -> tuple[int, np.ndarray]:
    if not (delta > 0 and delta <= span):
        raise ValueError(f"bin width must satisfy 0 < delta <= {span}, got {delta}")
    n = int(math.ceil(span / delta - 1e-12))
    # every bin is divided by the full width, a trailing partial bin included
    return n, np.full(n, float(delta))


def bin_trace(timeline: RenewalTimeline, delta: float, origin: float = 0.0, seed: int | None = None) -> BinnedTrace:
    """Exact mean rate per bin from interval overlaps.

    Bins cover ``[origin, horizon)``.  Every bin is ``(1/delta)`` times the
    volume in ``[m delta, (m+1) delta)``; past the horizon the rate counts as
    zero, so a trailing partial bin reads low and ``sum(values) * delta`` is
    the exact volume.
    """
    span = timeline.horizon - origin
    n, widths = _grid(span, delta)
    end = timeline.horizon
    s = np.clip(timeline.starts, origin, end) - origin
    e = np.clip(timeline.ends, origin, end) - origin
    values = _bin_intervals(s, e, timeline.rates, n, delta, widths)
    return BinnedTrace(bin_width=float(delta), values=values, origin=float(origin), seed=seed)


def generate_trace(config: SourceConfig, n_bins: int, delta: float, burn_in: float = 0.0,
                   start: str = "renewal") -> BinnedTrace:
    """Timeline over ``burn_in + n_bins*delta`` binned after discarding ``burn_in`` seconds."""
    horizon = burn_in + n_bins * delta
    tl = generate_timeline(config, horizon, start=start)
    tr = bin_trace(tl, delta, origin=burn_in, seed=config.seed)
    if len(tr) != n_bins:
        tr = BinnedTrace(tr.bin_width, tr.values[:n_bins], tr.origin, tr.seed)
    return tr


def theoretical_hurst(alpha0: float, alpha1: float) -> float:
    """``H = (3 - min(a0, a1)) / 2``; pass 2 for a finite-variance duration."""
    for a in (alpha0, alpha1):
        if not (1.0 < a <= 2.0):
            raise ValueError(f"tail index must lie in (1, 2], got {a}")
    return (3.0 - min(alpha0, alpha1)) / 2.0


def on_fraction(config: SourceConfig) -> float:
    """Long-run fraction of time spent On, ``mu1 / (mu0 + mu1)``."""
    mu1 = pareto_mean(config.on_law)
    mu0 = pareto_mean(config.off_law)
    return mu1 / (mu0 + mu1)


def expected_load(config: SourceConfig) -> float:
    return on_fraction(config) * config.mean_rate


def single_source_marginal(config: SourceConfig) -> MixedMarginal:
    """Stationary law of the instantaneous rate of one source.

    Mass ``mu0/(mu0+mu1)`` at zero; the rest follows the rate law scaled by the
    On probability.  Constant rate ``c`` is the degenerate case ``k_B = B = c``.
    """
    a1 = on_fraction(config)
    a0 = 1.0 - a1
    if isinstance(config.rate, ConstantRate):
        law = BoundedParetoLaw(shape=1.0, scale=config.rate.rate, cutoff=config.rate.rate)
    else:
        law = config.rate

    def density(x):
        return a1 * bpareto_pdf(law, x)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, a0 + a1 * bpareto_cdf(law, x))

    return MixedMarginal(
        atom_at_zero=a0,
        density=density,
        support=(law.scale, law.cutoff),
        point_masses=((law.cutoff, a1 * law.atom),),
        cdf=cdf,
    )

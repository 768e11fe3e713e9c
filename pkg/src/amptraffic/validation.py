"""Model-versus-data validation battery.

Each check regenerates data from fixed seeds, compares it with the model and
returns one or more :class:`CheckRecord` rows.  ``run_validation`` collects
them into a :class:`ValidationReport`; the ``validate`` command and the
acceptance tests both go through here.

Tolerances are multiplied by a global ``tolerance_scale`` and an optional
per-check factor, so a scale of 0 turns every tolerance band into an exact
equality and forces failures.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .aggregate import (
    AggregateConfig,
    aggregate_marginal,
    aggregate_trace,
    kb_recursion,
    mc_marginal_oracle,
    snapshot_samples,
)
from .distributions import (
    BoundedParetoLaw,
    ParetoLaw,
    _bpareto_sample_unchecked,
    _pareto_sample_unchecked,
    bpareto_atom,
    bpareto_cdf,
    pareto_cdf,
)
from .estimators import (
    acf_decay_exponent,
    autocorrelation,
    gaussianity_stats,
    hurst_aggregated_variance,
    hurst_rescaled_range,
    ks_distance,
    periodogram,
)
from .onoff import BinnedTrace, SourceConfig, generate_timeline, on_fraction, rate_at, theoretical_hurst
from .spectrum import binned_psd_model
from .streams import Purpose, open_uniform, substream

N_BINS = 1 << 20
MIN_SCALE = 256
HURST_SEEDS = 10
# (alpha0, alpha1, sources, bin width, tolerance): sources and bin width put
# the fitted block sizes where the aggregate is close to its Gaussian limit
# while keeping each trace near 3e7 renewal epochs
HURST_DESIGN = (
    (1.5, 1.5, 300, 0.5, 0.05),
    (1.2, 1.8, 40, 10.0, 0.05),
    (1.8, 1.8, 150, 1.0, 0.07),
)


@dataclass(frozen=True)
class CheckRecord:
    criterion: int
    name: str
    anchor: str
    expected: object
    observed: object
    tolerance: float | None
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    records: list[CheckRecord]
    seed: int
    tolerance_scale: float
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def criteria(self) -> dict[int, bool]:
        out: dict[int, bool] = {}
        for r in self.records:
            out[r.criterion] = out.get(r.criterion, True) and r.passed
        return out

    def to_dict(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "environment": {"seed": self.seed, "version": self.version, "tolerance_scale": self.tolerance_scale},
            "criteria": {str(k): v for k, v in sorted(self.criteria().items())},
            "checks": [asdict(r) for r in self.records],
        }


@dataclass
class Context:
    seed: int = 0
    workers: int = 1
    tolerance_scale: float = 1.0
    tolerances: dict = field(default_factory=dict)
    _traces: dict = field(default_factory=dict)

    def tol(self, check: str, value: float) -> float:
        return value * self.tolerance_scale * self.tolerances.get(check, 1.0)

    def hurst_trace(self, a0: float, a1: float, m: int, delta: float, i: int) -> np.ndarray:
        key = (a0, a1, m, delta, i)
        if key not in self._traces:
            src = SourceConfig(ParetoLaw(a1, 1.0, duration=True), ParetoLaw(a0, 1.0, duration=True))
            cfg = AggregateConfig(m, src, master_seed=self.seed + i)
            self._traces[key] = aggregate_trace(cfg, N_BINS, delta, workers=self.workers).values
        return self._traces[key]


def _record(ctx: Context, criterion: int, check: str, name: str, anchor: str, expected: float,
            observed: float, tol: float, detail: str = "") -> CheckRecord:
    t = ctx.tol(check, tol)
    return CheckRecord(criterion, name, anchor, float(expected), float(observed), t,
                       bool(abs(observed - expected) <= t), detail)


def _bound(ctx: Context, criterion: int, check: str, name: str, anchor: str, observed: float,
           limit: float, detail: str = "") -> CheckRecord:
    """``observed < limit``; the limit is the tolerance and scales with it."""
    t = ctx.tol(check, limit)
    return CheckRecord(criterion, name, anchor, 0.0, float(observed), t, bool(observed < t), detail)


# -- 1 ------------------------------------------------------------------------

def check_hurst_recovery(ctx: Context) -> list[CheckRecord]:
    out = []
    for a0, a1, m, delta, tol in HURST_DESIGN:
        h = theoretical_hurst(a0, a1)
        rs, av = [], []
        for i in range(HURST_SEEDS):
            x = ctx.hurst_trace(a0, a1, m, delta, i)
            rs.append(hurst_rescaled_range(x, min_scale=MIN_SCALE).value)
            av.append(hurst_aggregated_variance(x, min_scale=MIN_SCALE).value)
        pooled = (np.mean(rs) + np.mean(av)) / 2.0
        detail = (f"{m} stationary sources, bin {delta} s, {N_BINS} bins, {HURST_SEEDS} seeds; "
                  f"pooled mean {pooled:.4f}")
        anchor = "H = (3 - min(a0, a1)) / 2"
        out.append(_record(ctx, 1, "hurst-recovery", f"hurst R/S a0={a0} a1={a1}", anchor, h,
                           float(np.mean(rs)), tol, f"{detail}; sd {np.std(rs):.4f}"))
        out.append(_record(ctx, 1, "hurst-recovery", f"hurst aggregated-variance a0={a0} a1={a1}", anchor, h,
                           float(np.mean(av)), tol, f"{detail}; sd {np.std(av):.4f}"))
    return out


# -- 2, 3 ----------------------------------------------------------------------

def check_spectral_asymptote(ctx: Context) -> list[CheckRecord]:
    a0, a1, m, delta, _ = HURST_DESIGN[0]
    on, off = ParetoLaw(a1, 1.0), ParetoLaw(a0, 1.0)
    slopes, power = [], None
    for i in range(HURST_SEEDS):
        # frequencies in rad/s need the bin width, not the bare sample array
        est = periodogram(BinnedTrace(delta, ctx.hurst_trace(a0, a1, m, delta, i)))
        slopes.append(est.slope_fit.slope)
        power = est.power if power is None else power + est.power
        freqs = est.frequencies
    power /= HURST_SEEDS
    alpha = min(a0, a1)
    low = freqs < 10.0 * freqs[0]
    model = m * binned_psd_model(freqs[low], on, off, delta)
    ratio = float(power[low].sum() / model.sum())
    return [
        _record(ctx, 2, "spectral-asymptote", "periodogram low-band slope", "S(w) ~ W w^(alpha - 2)",
                alpha - 2.0, float(np.mean(slopes)), 0.15,
                f"lowest 1% of frequencies, {HURST_SEEDS} traces, range [{min(slopes):.3f}, {max(slopes):.3f}]"),
        _record(ctx, 2, "spectral-asymptote", "model PSD vs periodogram mean, lowest decade",
                "continuous PSD from On/Off characteristic functions", 1.0, ratio, 0.20,
                f"ratio of band sums over {int(low.sum())} frequencies, bin averaging and aliasing included"),
    ]


def check_autocorrelation(ctx: Context) -> list[CheckRecord]:
    a0, a1, m, delta, _ = HURST_DESIGN[0]
    betas = []
    for i in range(HURST_SEEDS):
        acf = autocorrelation(ctx.hurst_trace(a0, a1, m, delta, i), 1000)
        betas.append(-acf_decay_exponent(acf, lags=(10, 1000)).slope)
    h = theoretical_hurst(a0, a1)
    return [_record(ctx, 3, "autocorrelation-decay", "ACF decay exponent, lags 10-1000",
                    "R(k) ~ k^-beta, beta = 2 - 2H", 2.0 - 2.0 * h, float(np.mean(betas)), 0.15,
                    f"mean over {HURST_SEEDS} traces, range [{min(betas):.3f}, {max(betas):.3f}]")]


# -- 4 -------------------------------------------------------------------------

SNAPSHOT_SOURCE = SourceConfig(ParetoLaw(1.5, 1.0, duration=True), ParetoLaw(1.5, 2.0, duration=True),
                               BoundedParetoLaw(1.2, 1.0, 10.0))


def single_source_snapshots(ctx: Context, sources: int = 1000, per_source: int = 100) -> np.ndarray:
    """Rates of independent stationary-started sources at random times after a burn-in."""
    base = SNAPSHOT_SOURCE
    burn = 10.0 * base.cycle_mean
    span = 1000.0 * base.cycle_mean
    out = np.empty(sources * per_source)
    for i in range(sources):
        cfg = SourceConfig(base.on_law, base.off_law, base.rate, seed=ctx.seed, stream=i)
        tl = generate_timeline(cfg, burn + span, start="stationary")
        t = burn + span * open_uniform(substream(ctx.seed, i, Purpose.SNAPSHOT), per_source)
        out[i * per_source:(i + 1) * per_source] = rate_at(tl, t)
    return out


def check_single_source_marginal(ctx: Context) -> list[CheckRecord]:
    x = single_source_snapshots(ctx)
    law = SNAPSHOT_SOURCE.rate
    a0 = 1.0 - on_fraction(SNAPSHOT_SOURCE)
    nz = x[x > 0]
    ks = ks_distance(nz, lambda v: bpareto_cdf(law, v),
                     lambda v: np.where(v >= law.cutoff, 1.0 - bpareto_atom(law), bpareto_cdf(law, v)))
    return [
        _record(ctx, 4, "single-source-marginal", "P(rate = 0)", "atom at zero = mu0 / (mu0 + mu1)",
                a0, float(np.mean(x == 0)), 0.01, f"{len(x)} snapshots from 1000 stationary sources"),
        _bound(ctx, 4, "single-source-marginal", "KS nonzero rates vs Bounded Pareto",
               "nonzero part is the Bounded-Pareto rate law", ks, 0.02, f"{len(nz)} nonzero snapshots"),
    ]


# -- 5 -------------------------------------------------------------------------

def marginal_source(alpha_b: float) -> SourceConfig:
    # On 1 s, Off 19 s scales: A0 = 0.95, the sparse-activity regime of the body form
    return SourceConfig(ParetoLaw(1.5, 1.0, duration=True), ParetoLaw(1.5, 19.0, duration=True),
                        BoundedParetoLaw(alpha_b, 1.0, 10.0))


def check_aggregate_marginal(ctx: Context, samples: int = 10**6) -> list[CheckRecord]:
    out = []
    for alpha_b in (1.2, 1.5):
        src = marginal_source(alpha_b)
        a1 = on_fraction(src)
        a0 = 1.0 - a1
        k1 = kb_recursion(1, a0, a1, alpha_b, 1.0).value
        out.append(CheckRecord(5, f"k_B(1) = k_B, alpha_B={alpha_b}", "k_B(1) = k_B", 1.0, k1, 0.0, k1 == 1.0))
        for n in (1, 2, 3, 5):
            cfg = AggregateConfig(n, src, master_seed=ctx.seed)
            mc = mc_marginal_oracle(cfg, samples=samples)
            marg = aggregate_marginal(cfg, mc=mc, tolerance=ctx.tol("aggregate-marginal", 0.05))
            p = a0**n
            sigma = math.sqrt(p * (1 - p) / samples)
            out.append(_record(ctx, 5, "aggregate-marginal", f"atom at zero N={n} alpha_B={alpha_b}",
                               "atom = A0^N", p, mc.zero_frequency, 3.0 * sigma, "binomial 3 sigma"))
            out.append(_bound(ctx, 5, "aggregate-marginal", f"body L1 N={n} alpha_B={alpha_b}",
                              "Pareto body with displaced scale k_B(N) on [k_B(N), B)", marg.l1, 0.05,
                              f"k_B(N)={marg.k_bn:.6g} via {marg.kb_method}; A0={a0:.3f}; "
                              f"tries {[(m, round(k, 6), round(l, 4)) for m, k, l in marg.attempts]}"))
    return out


# -- 6 -------------------------------------------------------------------------

GAUSS_NS = (2, 8, 32, 128)
GAUSS_SEEDS = 20
GAUSS_SAMPLES = 10**5


def gauss_source(cutoff: float = 10.0) -> SourceConfig:
    return SourceConfig(ParetoLaw(1.5, 1.0, duration=True), ParetoLaw(1.5, 1.0, duration=True),
                        BoundedParetoLaw(1.2, 1.0, cutoff))


def mean_abs_skewness(ctx: Context, n: int, cutoff: float) -> float:
    vals = []
    for i in range(GAUSS_SEEDS):
        cfg = AggregateConfig(n, gauss_source(cutoff), master_seed=ctx.seed + i)
        vals.append(abs(gaussianity_stats(snapshot_samples(cfg, GAUSS_SAMPLES)).skewness))
    return float(np.mean(vals))


def check_gaussianization(ctx: Context) -> list[CheckRecord]:
    skews = [mean_abs_skewness(ctx, n, 10.0) for n in GAUSS_NS]
    steps = np.diff(skews)
    low_b = mean_abs_skewness(ctx, 32, 3.0)
    high_b = mean_abs_skewness(ctx, 32, 100.0)
    anchor = "aggregate tends to Gaussian as N grows"
    return [
        CheckRecord(6, "mean |skewness| decreasing over N=2,8,32,128", anchor, "decreasing",
                    [round(s, 6) for s in skews], None, bool(np.all(steps < 0)),
                    f"{GAUSS_SEEDS} seeds x {GAUSS_SAMPLES} snapshots, B = 10 k_B"),
        _bound(ctx, 6, "gaussianization", "mean |skewness| at N=128", anchor, skews[-1], 0.25),
        CheckRecord(6, "B = 100 k_B more skewed than B = 3 k_B at N=32",
                    "larger cutoff needs more active sources", "B=100 > B=3",
                    [round(low_b, 6), round(high_b, 6)], None, bool(high_b > low_b)),
    ]


# -- 7 -------------------------------------------------------------------------

def check_distribution_layer(ctx: Context, samples: int = 10**5) -> list[CheckRecord]:
    par = ParetoLaw(1.5, 1.0)
    bp = BoundedParetoLaw(1.2, 1.0, 10.0)
    x = _pareto_sample_unchecked(par, open_uniform(substream(ctx.seed, 0, Purpose.ON), samples))
    y = _bpareto_sample_unchecked(bp, open_uniform(substream(ctx.seed, 0, Purpose.RATE), samples))
    ks_p = ks_distance(x, lambda v: pareto_cdf(par, v))
    ks_b = ks_distance(y, lambda v: bpareto_cdf(bp, v),
                       lambda v: np.where(v >= bp.cutoff, 1.0 - bpareto_atom(bp), bpareto_cdf(bp, v)))
    atom = bpareto_atom(bp)
    sigma = math.sqrt(atom * (1 - atom) / samples)
    return [
        _bound(ctx, 7, "distribution-layer", "KS Pareto sampler", "Pareto survival (k/x)^a", ks_p, 0.01),
        _bound(ctx, 7, "distribution-layer", "KS Bounded-Pareto sampler", "Bounded-Pareto law with atom at B",
               ks_b, 0.01),
        _record(ctx, 7, "distribution-layer", "Bounded-Pareto atom frequency", "atom mass (k_B/B)^alpha_B",
                atom, float(np.mean(y == bp.cutoff)), 3.0 * sigma, "binomial 3 sigma"),
    ]


# -- 8 -------------------------------------------------------------------------

def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()


def check_determinism(ctx: Context) -> list[CheckRecord]:
    src = SourceConfig(ParetoLaw(1.5, 1.0, duration=True), ParetoLaw(1.5, 1.0, duration=True),
                       BoundedParetoLaw(1.2, 1.0, 10.0), seed=ctx.seed)
    tl1 = generate_timeline(src, 1e5)
    tl2 = generate_timeline(src, 1e5)
    same_tl = all(_digest(getattr(tl1, f)) == _digest(getattr(tl2, f)) for f in ("starts", "on", "off", "rates"))
    cfg = AggregateConfig(64, src, master_seed=ctx.seed)
    digests = {w: _digest(aggregate_trace(cfg, 1 << 16, 1.0, workers=w).values) for w in (1, 2, 4)}
    snap = {_digest(snapshot_samples(cfg, 10**4, chunk=c)) for c in (1000, 1 << 18)}
    return [
        CheckRecord(8, "timeline repeat", "fixed seed gives identical output", "identical", same_tl, None, same_tl),
        CheckRecord(8, "aggregate across worker counts", "fixed seed gives identical output", "identical",
                    len(set(digests.values())) == 1, None, len(set(digests.values())) == 1,
                    f"workers 1, 2, 4 sha256 {digests[1][:16]}"),
        CheckRecord(8, "snapshots across chunk sizes", "fixed seed gives identical output", "identical",
                    len(snap) == 1, None, len(snap) == 1),
    ]


CHECKS = {
    "hurst-recovery": (1, check_hurst_recovery),
    "spectral-asymptote": (2, check_spectral_asymptote),
    "autocorrelation-decay": (3, check_autocorrelation),
    "single-source-marginal": (4, check_single_source_marginal),
    "aggregate-marginal": (5, check_aggregate_marginal),
    "gaussianization": (6, check_gaussianization),
    "distribution-layer": (7, check_distribution_layer),
    "determinism": (8, check_determinism),
}


def run_validation(checks=None, seed: int = 0, workers: int = 1, tolerance_scale: float = 1.0,
                   tolerances: dict | None = None, context: Context | None = None) -> ValidationReport:
    ctx = context or Context(seed=seed, workers=workers, tolerance_scale=tolerance_scale,
                             tolerances=dict(tolerances or {}))
    names = list(CHECKS) if checks is None else list(checks)
    records: list[CheckRecord] = []
    for name in names:
        records.extend(CHECKS[name][1](ctx))
    return ValidationReport(records=records, seed=ctx.seed, tolerance_scale=ctx.tolerance_scale)

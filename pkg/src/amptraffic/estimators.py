"""Statistics on uniformly binned traces.

Hurst estimators (rescaled range, aggregated variance, periodogram slope),
sample autocorrelation, the Hill tail-index estimator and moment-based
Gaussianity statistics.  All functions take a :class:`BinnedTrace` or a plain
1-d array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .onoff import BinnedTrace

__all__ = [
    "DegenerateTraceError",
    "HurstEstimate",
    "SlopeFit",
    "SpectralEstimate",
    "autocorrelation",
    "acf_decay_exponent",
    "periodogram",
    "log_binned",
    "hurst_rescaled_range",
    "hurst_aggregated_variance",
    "hurst_spectral",
    "hill_tail_index",
    "gaussianity_stats",
    "dyadic_scales",
    "expected_rs",
    "ks_distance",
]

RESCALED_RANGE = "rescaled-range"
AGGREGATED_VARIANCE = "aggregated-variance"
SPECTRAL_SLOPE = "spectral-slope"


class DegenerateTraceError(ValueError):
    """Raised for constant input where a correlation or variance is undefined."""


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    stderr: float = 0.0


@dataclass(frozen=True)
class HurstEstimate:
    method: str
    value: float
    stderr: float
    n_points: int
    clamped: bool = False
    scales: np.ndarray | None = None
    statistic: np.ndarray | None = None


@dataclass(frozen=True)
class SpectralEstimate:
    """One-sided periodogram ``|DFT|^2 / n`` at ``2*pi*k/(n*dt)``, k = 1..n//2.

    ``frequencies`` are in rad/s.  ``variance`` is the mean of the full
    two-sided periodogram, equal to the trace variance by Parseval.
    """

    frequencies: np.ndarray
    power: np.ndarray
    n: int
    bin_width: float
    slope_fit: SlopeFit | None = None
    band: tuple[float, float] | None = None

    @property
    def variance(self) -> float:
        p = self.power
        if self.n % 2 == 0:
            total = 2.0 * p[:-1].sum() + p[-1]
        else:
            total = 2.0 * p.sum()
        return float(total / self.n)


def _values(trace) -> tuple[np.ndarray, float]:
    if isinstance(trace, BinnedTrace):
        return np.asarray(trace.values, dtype=float), trace.bin_width
    return np.asarray(trace, dtype=float).ravel(), 1.0


def _linfit(x: np.ndarray, y: np.ndarray) -> SlopeFit:
    n = len(x)
    if n < 2:
        raise ValueError("need at least two points for a slope fit")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    if n > 2:
        s2 = np.sum(resid**2) / (n - 2)
        se = float(np.sqrt(s2 / np.sum((x - x.mean()) ** 2)))
    else:
        se = 0.0
    return SlopeFit(slope=float(coef[0]), intercept=float(coef[1]), residual=rms, stderr=se)


def autocorrelation(trace, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation ``R(0..max_lag)`` via FFT.

    Dividing by ``n`` at every lag keeps the sequence positive semi-definite,
    so ``|R(k)| <= 1``.
    """
    x, _ = _values(trace)
    n = len(x)
    if max_lag < 0 or n < 4 * max_lag:
        raise ValueError(f"trace length {n} must be at least 4*max_lag ({4 * max_lag})")
    x = x - x.mean()
    c0 = float(np.dot(x, x))
    if c0 <= 0 or not math.isfinite(c0):
        raise DegenerateTraceError("autocorrelation of a constant trace is undefined")
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    r = acov / c0
    r[0] = 1.0
    return np.clip(r, -1.0, 1.0)


def acf_decay_exponent(acf: np.ndarray, lags=(10, 1000)) -> SlopeFit:
    """Fit ``R(k) ~ C k^-beta`` on log-spaced lags; returns slope ``-beta``.

    Lags with non-positive correlation are skipped (log undefined).
    """
    lo, hi = lags
    ks = np.unique(np.round(np.geomspace(lo, hi, 40)).astype(int))
    ks = ks[ks < len(acf)]
    r = acf[ks]
    ok = r > 0
    if ok.sum() < 3:
        raise DegenerateTraceError("too few positive correlations to fit a decay exponent")
    return _linfit(np.log(ks[ok]), np.log(r[ok]))


def periodogram(trace, band: tuple[float, float] | None = None, fraction: float = 0.01) -> SpectralEstimate:
    """Mean-removed periodogram with a log-log slope fit over a low band.

    By default the band is the lowest ``fraction`` of the positive
    frequencies; pass ``band=(w_lo, w_hi)`` in rad/s to override.  The fit is
    made on log-binned averages so every decade carries equal weight, with
    the log-of-mean bias of each bin removed.
    """
    x, dt = _values(trace)
    n = len(x)
    if n < 1024:
        raise ValueError(f"periodogram needs at least 1024 samples, got {n}")
    x = x - x.mean()
    fx = np.fft.rfft(x)
    power = (fx.real**2 + fx.imag**2)[1:] / n
    freqs = 2.0 * np.pi * np.arange(1, len(power) + 1) / (n * dt)
    if band is None:
        band = (freqs[0], freqs[max(int(len(freqs) * fraction), 9)])
    sel = (freqs >= band[0]) & (freqs <= band[1])
    fit = None
    if sel.sum() >= 3 and np.all(power[sel] >= 0):
        fb, pb, cnt = log_binned(freqs[sel], power[sel], counts=True)
        ok = pb > 0
        if ok.sum() >= 2:
            # ordinates are ~ exponential, so the log of a mean of c of them is low by
            # digamma(c) - log(c); sparse low-frequency bins would otherwise tilt the slope
            bias = special.digamma(cnt[ok]) - np.log(cnt[ok])
            fit = _linfit(np.log(fb[ok]), np.log(pb[ok]) - bias)
    return SpectralEstimate(frequencies=freqs, power=power, n=n, bin_width=dt, slope_fit=fit, band=tuple(band))


def log_binned(freqs: np.ndarray, power: np.ndarray, per_decade: int = 10,
               counts: bool = False):
    """Average ``power`` in logarithmically spaced frequency bins.

    Returns the geometric-mean frequency and arithmetic-mean power of each
    non-empty bin, plus the number of ordinates per bin when ``counts``.
    """
    lf = np.log10(freqs)
    edges = np.arange(lf[0], lf[-1] + 1.0 / per_decade, 1.0 / per_decade)
    idx = np.clip(np.digitize(lf, edges) - 1, 0, len(edges) - 1)
    cnt = np.bincount(idx, minlength=len(edges))
    keep = cnt > 0
    fmean = np.bincount(idx, weights=lf, minlength=len(edges))[keep] / cnt[keep]
    pmean = np.bincount(idx, weights=power, minlength=len(edges))[keep] / cnt[keep]
    if counts:
        return 10.0**fmean, pmean, cnt[keep]
    return 10.0**fmean, pmean


def dyadic_scales(n: int, min_scale: int, drop_largest: int = 2) -> np.ndarray:
    top = int(math.floor(math.log2(n)))
    lo = int(math.ceil(math.log2(min_scale)))
    scales = 2 ** np.arange(lo, top + 1)
    if drop_largest:
        scales = scales[:-drop_largest]
    return scales


def _hurst_result(method, fit: SlopeFit, h: float, scales, stat) -> HurstEstimate:
    clamped = not (0.0 < h < 1.0)
    value = float(np.clip(h, 1e-6, 1.0 - 1e-6))
    return HurstEstimate(method=method, value=value, stderr=float(fit.stderr), n_points=len(scales),
                         clamped=clamped, scales=np.asarray(scales), statistic=np.asarray(stat))


def _check_length(n: int, min_len: int):
    if n < min_len:
        raise ValueError(f"trace too short for Hurst estimation: {n} < {min_len}")


def expected_rs(m: int) -> float:
    """Anis-Lloyd expectation of R/S for ``m`` i.i.d. Gaussian values (Peters' small-m factor)."""
    if m < 3:
        raise ValueError("block size must be at least 3")
    i = np.arange(1, m)
    total = float(np.sum(np.sqrt((m - i) / i)))
    g = math.exp(special.gammaln((m - 1) / 2.0) - special.gammaln(m / 2.0)) / math.sqrt(math.pi)
    return (m - 0.5) / m * g * total


def hurst_rescaled_range(trace, min_scale: int = 64, drop_largest: int = 2, min_len: int = 1 << 12,
                         correction: str | None = "anis-lloyd") -> HurstEstimate:
    """R/S analysis over dyadic block sizes.

    Each block's range of cumulative deviations is divided by its standard
    deviation; the block averages are regressed on block size in log-log.
    With ``correction="anis-lloyd"`` the regression is on
    ``log(R/S) - log E_iid[R/S]`` and ``H = 0.5 + slope``, which removes the
    small-block bias that pushes the classic estimate above 0.5 on white
    noise.  ``correction=None`` gives the classic slope.
    """
    if correction not in (None, "anis-lloyd"):
        raise ValueError(f"unknown R/S correction {correction!r}")
    x, _ = _values(trace)
    n = len(x)
    _check_length(n, min_len)
    if np.ptp(x) == 0:
        raise DegenerateTraceError("R/S of a constant trace is undefined")
    scales, rs = [], []
    for m in dyadic_scales(n, min_scale, drop_largest):
        nb = n // m
        blocks = x[: nb * m].reshape(nb, m)
        dev = blocks - blocks.mean(axis=1, keepdims=True)
        z = np.cumsum(dev, axis=1)
        r = z.max(axis=1) - np.minimum(z.min(axis=1), 0.0)
        # ddof=1 is the scale the i.i.d. expectation is stated for
        s = blocks.std(axis=1, ddof=1)
        ok = s > 0
        if ok.any():
            scales.append(m)
            rs.append(np.mean(r[ok] / s[ok]))
    scales = np.asarray(scales, dtype=float)
    rs = np.asarray(rs)
    if correction is None:
        fit = _linfit(np.log(scales), np.log(rs))
        h = fit.slope
    else:
        base = np.array([expected_rs(int(m)) for m in scales])
        fit = _linfit(np.log(scales), np.log(rs) - np.log(base))
        h = 0.5 + fit.slope
    return _hurst_result(RESCALED_RANGE, fit, h, scales, rs)


def _variance_bias(nb: np.ndarray, h: float) -> np.ndarray:
    # E[sample variance of nb block means] / Var(block mean) for an exactly self-similar process
    return (nb - nb ** (2.0 * h - 1.0)) / (nb - 1.0)


def hurst_aggregated_variance(trace, min_scale: int = 64, drop_largest: int = 2,
                              min_len: int = 1 << 12, bias_correction: bool = True) -> HurstEstimate:
    """Variance of non-overlapping block means scales as ``m^(2H-2)``.

    Under long-range dependence the sample variance of ``n/m`` block means
    underestimates their variance by ``(nb - nb^(2H-1)) / (nb - 1)``, which
    flattens the curve at large ``m``.  With ``bias_correction`` that factor
    is fitted jointly: ``H`` minimizes the log-log residual with the intercept
    profiled out.  The log of a sample variance from ``nb`` roughly Gaussian
    means is also low by ``E[log(chi2_k / k)]``, ``k = nb - 1``; that offset is
    removed first.  Without ``bias_correction`` the plain least-squares slope
    is used.
    """
    x, _ = _values(trace)
    n = len(x)
    _check_length(n, min_len)
    if np.ptp(x) == 0:
        raise DegenerateTraceError("aggregated variance of a constant trace is undefined")
    scales, var = [], []
    for m in dyadic_scales(n, min_scale, drop_largest):
        nb = n // m
        if nb < 2:
            continue
        means = x[: nb * m].reshape(nb, m).mean(axis=1)
        v = means.var(ddof=1)
        if v > 0:
            scales.append(m)
            var.append(v)
    scales = np.asarray(scales, dtype=float)
    var = np.asarray(var)
    lm, lv = np.log(scales), np.log(var)
    fit = _linfit(lm, lv)
    h = 1.0 + fit.slope / 2.0
    if bias_correction and len(scales) > 2:
        nb = np.floor(n / scales)
        k = nb - 1.0
        lv = lv - (special.digamma(k / 2.0) - np.log(k / 2.0))

        def sse(hh: float) -> float:
            r = lv - (2.0 * hh - 2.0) * lm - np.log(_variance_bias(nb, hh))
            return float(np.sum((r - r.mean()) ** 2))

        res = optimize.minimize_scalar(sse, bounds=(1e-3, 1.0 - 1e-3), method="bounded",
                                       options={"xatol": 1e-8})
        h = float(res.x)
        fit = _linfit(lm, lv - np.log(_variance_bias(nb, h)))
    return _hurst_result(AGGREGATED_VARIANCE, fit, h, scales, var)


def hurst_spectral(trace, fraction: float = 0.01, band=None) -> HurstEstimate:
    """H from the low-frequency periodogram slope: ``slope = 1 - 2H``."""
    est = trace if isinstance(trace, SpectralEstimate) else periodogram(trace, band=band, fraction=fraction)
    if est.slope_fit is None:
        raise DegenerateTraceError("no usable low-frequency band for the spectral slope")
    fit = est.slope_fit
    h = (1.0 - fit.slope) / 2.0
    return HurstEstimate(method=SPECTRAL_SLOPE, value=float(np.clip(h, 1e-6, 1 - 1e-6)),
                         stderr=fit.stderr / 2.0, n_points=int(np.sum(
                             (est.frequencies >= est.band[0]) & (est.frequencies <= est.band[1]))),
                         clamped=not (0 < h < 1))


def hill_tail_index(samples, k: int) -> float:
    """Hill estimator ``1 / mean(log(X_(i) / X_(k+1)))`` over the top ``k`` order statistics."""
    x = np.asarray(samples, dtype=float).ravel()
    n = len(x)
    if k < 10:
        raise ValueError(f"k must be at least 10, got {k}")
    if k >= n / 2:
        raise ValueError(f"k must be below n/2 ({n / 2}), got {k}")
    if np.any(x <= 0):
        raise ValueError("Hill estimation needs strictly positive samples")
    top = np.partition(x, n - k - 1)[n - k - 1:]
    threshold = top.min()
    logs = np.log(top[top > threshold] / threshold)
    # ties at the threshold contribute zero
    gamma = logs.sum() / k
    if gamma <= 0:
        raise DegenerateTraceError("top order statistics are all tied; tail index undefined")
    return float(1.0 / gamma)


@dataclass(frozen=True)
class GaussianityStats:
    skewness: float
    excess_kurtosis: float
    statistic: float
    p_value: float
    n: int


def gaussianity_stats(samples) -> GaussianityStats:
    """Sample skewness, excess kurtosis and the Jarque-Bera statistic.

    ``statistic = n/6 * (S^2 + K^2/4)`` is asymptotically chi-square with two
    degrees of freedom under normality.
    """
    x, _ = _values(samples)
    n = len(x)
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    if np.ptp(x) == 0:
        raise DegenerateTraceError("zero variance")
    s = float(stats.skew(x))
    k = float(stats.kurtosis(x))
    jb = n / 6.0 * (s * s + k * k / 4.0)
    return GaussianityStats(skewness=s, excess_kurtosis=k, statistic=jb,
                            p_value=float(stats.chi2.sf(jb, 2)), n=n)


def ks_distance(samples, cdf, left_cdf=None) -> float:
    """Kolmogorov-Smirnov distance ``sup |F_n - F|`` that stays exact at atoms.

    ``left_cdf(x)`` gives ``P(X < x)``; pass it when ``cdf`` jumps (for the
    Bounded-Pareto atom at the cutoff).  Both one-sided limits are compared
    at every distinct sample value, so ties at an atom are not mistaken for
    a discrepancy.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise ValueError("need at least one sample")
    uniq, first = np.unique(x, return_index=True)
    last = np.append(first[1:], n)
    f = np.asarray(cdf(uniq), dtype=float)
    # continuous law: the left limit equals the CDF
    f_left = f if left_cdf is None else np.asarray(left_cdf(uniq), dtype=float)
    d_right = np.abs(last / n - f)
    d_left = np.abs(first / n - f_left)
    return float(max(d_right.max(), d_left.max()))

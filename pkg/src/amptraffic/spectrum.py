"""Model-side spectra of the On/Off rate process.

The continuous part of the power spectral density of a unit-rate alternating
renewal process with On law ``F1`` and Off law ``F0`` is::

    S(w) = 2 / (w^2 (mu0 + mu1)) * Re{ (1 - F0)(1 - F1) / (1 - F0 F1) }

with ``F_i = F_i(w)`` the characteristic functions.  Its mass at zero
frequency is the mean on-fraction ``mu1 / (mu0 + mu1)``.  Near ``w = 0`` the
continuous part behaves like ``W w^(a-2)`` with ``a = min(a0, a1)``.

Pareto characteristic functions have no elementary closed form, so they are
computed by Fourier quadrature (QUADPACK QAWF) of the survival function,
which keeps ``1 - F(w)`` accurate as ``w -> 0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .distributions import ParetoLaw, pareto_mean

__all__ = [
    "QuadratureError",
    "SpectralAsymptote",
    "LRDVerdict",
    "char_fn",
    "one_minus_char_fn",
    "psd_model",
    "renewal_psd",
    "dc_mass",
    "binned_psd_model",
    "fit_asymptote",
    "lrd_spectral_test",
]

QUAD_TOL = 1e-8


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved abs error {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class SpectralAsymptote:
    alpha: float
    slope: float
    W: float
    band: tuple[float, float]
    residual: float

    @property
    def expected_slope(self) -> float:
        return self.alpha - 2.0


@dataclass(frozen=True)
class LRDVerdict:
    lrd: bool
    hurst: float
    slope: float


def _qawf(a: float, theta: float, weight: str) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            res = integrate.quad(lambda y: y ** (-a), 1.0, np.inf, weight=weight, wvar=theta,
                                 epsabs=QUAD_TOL * 1e-2, limlst=200, limit=400, full_output=1)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"Fourier quadrature failed for theta={theta}: {exc}", math.nan)
    val, err = res[0], res[1]
    if not math.isfinite(val) or err > QUAD_TOL:
        raise QuadratureError(f"Fourier quadrature did not converge for theta={theta}", err)
    return val


@lru_cache(maxsize=64)
def _unit_tail(a: float) -> tuple[float, float]:
    return _qawf(a, 1.0, "cos"), _qawf(a, 1.0, "sin")


def _log_quad(fn, lo: float, hi: float) -> float:
    """``int_lo^hi fn(z) dz`` integrated in ``u = log z``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda u: fn(math.exp(u)) * math.exp(u), math.log(lo), math.log(hi),
                                  epsabs=QUAD_TOL * 1e-3, epsrel=1e-10, limit=400)
    if not math.isfinite(val) or err > QUAD_TOL:
        raise QuadratureError("finite-range quadrature did not converge", err)
    return val


def _fourier_tail(a: float, theta: float) -> complex:
    """``int_1^inf y^-a exp(-i theta y) dy`` for ``theta > 0``.

    For ``theta < 1`` the integral is rescaled to ``theta^(a-1) int_theta^inf``
    so the oscillatory part is always integrated at unit frequency and the
    ``z^-a`` singularity near the lower limit is handled in closed form.
    """
    if theta >= 1.0:
        return complex(_qawf(a, theta, "cos"), -_qawf(a, theta, "sin"))
    c1, s1 = _unit_tail(a)
    cos_part = _log_quad(lambda z: z ** (-a) * (math.cos(z) - 1.0), theta, 1.0)
    cos_part += (theta ** (1.0 - a) - 1.0) / (a - 1.0) + c1
    sin_part = _log_quad(lambda z: z ** (-a) * math.sin(z), theta, 1.0) + s1
    scale = theta ** (a - 1.0)
    return complex(scale * cos_part, -scale * sin_part)


def one_minus_char_fn(law: ParetoLaw, omega: float) -> complex:
    """``1 - E[exp(-i w X)]`` computed without cancellation.

    Integration by parts gives ``1 - F(w) = i w int_0^inf P(X > x) exp(-i w x) dx``;
    the part below the scale is closed-form.
    """
    if omega == 0:
        return 0j
    if omega < 0:
        return one_minus_char_fn(law, -omega).conjugate()
    a, k = law.shape, law.scale
    theta = omega * k
    # i w int_0^k exp(-i w x) dx = 1 - exp(-i theta)
    head = complex(2.0 * math.sin(theta / 2.0) ** 2, math.sin(theta))
    tail = 1j * theta * _fourier_tail(a, theta)
    return head + tail


def char_fn(law: ParetoLaw, omega: float) -> complex:
    """``E[exp(-i w X)]`` for a Pareto law; ``char_fn(-w) == conj(char_fn(w))``."""
    if omega == 0:
        raise ValueError("char_fn is evaluated at nonzero frequency; the value at 0 is 1")
    return 1.0 - one_minus_char_fn(law, omega)


def dc_mass(on_law: ParetoLaw, off_law: ParetoLaw) -> float:
    mu1 = pareto_mean(on_law)
    mu0 = pareto_mean(off_law)
    return mu1 / (mu0 + mu1)


def renewal_psd(omega: float, g_on: complex, g_off: complex, mean_on: float, mean_off: float) -> float:
    """Continuous PSD of a unit-rate alternating renewal process at one ``omega > 0``.

    ``g_on`` and ``g_off`` are ``1 - F(omega)`` of the On and Off laws; any
    duration laws work, which is what lets the exponential case serve as a
    closed-form check.
    """
    # 1 - F0 F1 = g0 + g1 - g0 g1
    ratio = g_off * g_on / (g_off + g_on - g_off * g_on)
    return 2.0 / (omega * omega * (mean_on + mean_off)) * ratio.real


def psd_model(omega, on_law: ParetoLaw, off_law: ParetoLaw, rate: float = 1.0):
    """Continuous part of the PSD at ``omega`` (rad/s), scaled by ``rate**2``.

    Convention: ``S(w) = int C(t) exp(-i w t) dt`` over the real line, with
    ``C`` the autocovariance of the rate process.  Even in ``omega``.
    """
    w = np.abs(np.atleast_1d(np.asarray(omega, dtype=float)))
    if np.any(w == 0):
        raise ValueError("psd_model is defined for omega != 0; the DC part is dc_mass()")
    mu1, mu0 = pareto_mean(on_law), pareto_mean(off_law)
    out = np.empty_like(w)
    for i, wi in enumerate(w):
        out[i] = renewal_psd(wi, one_minus_char_fn(on_law, wi), one_minus_char_fn(off_law, wi), mu1, mu0)
    out *= rate * rate
    return float(out[0]) if np.ndim(omega) == 0 else out


def binned_psd_model(omega, on_law: ParetoLaw, off_law: ParetoLaw, delta: float,
                     rate: float = 1.0, n_alias: int = 3):
    """Expected periodogram of the bin-averaged trace at ``omega`` (rad/s).

    Bin averaging multiplies the spectrum by ``sinc^2(w delta / 2)`` and
    sampling folds in the aliases ``w + 2 pi j / delta``; the result is in the
    units of :func:`amptraffic.estimators.periodogram` power.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.zeros_like(w)
    for j in range(-n_alias, n_alias + 1):
        wj = w + 2.0 * np.pi * j / delta
        half = wj * delta / 2.0
        out += psd_model(wj, on_law, off_law, rate) * (np.sin(half) / half) ** 2
    out /= delta
    return float(out[0]) if np.ndim(omega) == 0 else out


def fit_asymptote(omega, psd, alpha0: float, alpha1: float, band: tuple[float, float] | None = None,
                  max_residual: float = 0.1) -> SpectralAsymptote:
    """Least-squares fit of ``log S = log W + slope * log w`` on a low band.

    The default band is the lowest two decades of ``omega``.  A log-residual
    above ``max_residual`` means the power-law regime was not reached.
    """
    w = np.asarray(omega, dtype=float)
    s = np.asarray(psd, dtype=float)
    order = np.argsort(w)
    w, s = w[order], s[order]
    if band is None:
        band = (w[0], min(w[0] * 100.0, w[-1]))
    sel = (w >= band[0]) & (w <= band[1])
    if sel.sum() < 10 or band[1] / band[0] < 100.0 * (1 - 1e-9):
        raise ValueError("need at least 10 points spanning at least two decades")
    if np.any(s[sel] <= 0):
        raise ValueError("spectral values must be positive on the fit band")
    lw, ls = np.log(w[sel]), np.log(s[sel])
    slope, icpt = np.polyfit(lw, ls, 1)
    resid = float(np.sqrt(np.mean((ls - (icpt + slope * lw)) ** 2)))
    if resid > max_residual:
        raise ValueError(f"log-log residual {resid:.3g} exceeds {max_residual}: asymptotic regime not reached")
    return SpectralAsymptote(alpha=min(alpha0, alpha1), slope=float(slope), W=float(math.exp(icpt)),
                             band=(float(band[0]), float(band[1])), residual=resid)


def lrd_spectral_test(asymptote: SpectralAsymptote | float) -> LRDVerdict:
    """LRD iff the low-frequency slope lies in (-1, 0); ``H = (1 - slope) / 2``.

    A slope of ``a - 2`` gives ``H = (3 - a) / 2``.
    """
    slope = asymptote.slope if isinstance(asymptote, SpectralAsymptote) else float(asymptote)
    return LRDVerdict(lrd=-1.0 < slope < 0.0, hurst=(1.0 - slope) / 2.0, slope=slope)

"""Heavy-tailed laws used by the traffic model.

Two laws are provided:

* :class:`ParetoLaw` -- two-parameter Pareto for On/Off durations,
  ``f(x) = a k^a x^-(a+1)`` on ``[k, inf)``.
* :class:`BoundedParetoLaw` -- Pareto truncated at a cutoff ``B`` with the
  removed tail mass ``(k/B)^a`` placed as an atom at ``B``.

Every function accepts scalars or numpy arrays.  Sampling is inverse-transform
from caller-supplied uniforms; this module never draws random numbers itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParetoLaw",
    "BoundedParetoLaw",
    "pareto_survival",
    "pareto_cdf",
    "pareto_pdf",
    "pareto_sample",
    "pareto_mean",
    "pareto_variance",
    "pareto_residual_survival",
    "pareto_residual_sample",
    "bpareto_survival",
    "bpareto_cdf",
    "bpareto_pdf",
    "bpareto_atom",
    "bpareto_sample",
    "bpareto_mean",
    "bpareto_moment",
    "bpareto_variance",
]


@dataclass(frozen=True)
class ParetoLaw:
    """Pareto law with tail index ``shape`` and lower bound ``scale``.

    ``duration=True`` enforces ``1 < shape < 2`` (finite mean, infinite
    variance), which is what the On/Off duration laws require.  The Off index
    is held to ``1 < a0 < 2``, the same range as the On index.
    """

    shape: float
    scale: float
    duration: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise ValueError(f"shape must be a positive finite number, got {self.shape}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be a positive finite number, got {self.scale}")
        if self.duration and not (1.0 < self.shape < 2.0):
            raise ValueError(
                f"duration laws need 1 < shape < 2 (finite mean, infinite variance), got {self.shape}"
            )

    @property
    def mean(self) -> float:
        return pareto_mean(self)


@dataclass(frozen=True)
class BoundedParetoLaw:
    """Pareto law on ``[scale, cutoff]`` with an atom of mass ``(scale/cutoff)**shape`` at the cutoff."""

    shape: float
    scale: float
    cutoff: float

    def __post_init__(self):
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise ValueError(f"shape must be a positive finite number, got {self.shape}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be a positive finite number, got {self.scale}")
        if not (math.isfinite(self.cutoff) and self.cutoff >= self.scale):
            raise ValueError(f"cutoff must be finite and >= scale, got {self.cutoff}")

    @property
    def atom(self) -> float:
        return bpareto_atom(self)

    @property
    def mean(self) -> float:
        return bpareto_mean(self)


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


# -- Pareto -----------------------------------------------------------------

def pareto_survival(law: ParetoLaw, x):
    """P(X > x): 1 for ``x <= k``, ``(k/x)**a`` above."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x <= law.scale, 1.0, (law.scale / np.maximum(x, law.scale)) ** law.shape)
    return _scalar_or_array(out, x)


def pareto_cdf(law: ParetoLaw, x):
    x = np.asarray(x, dtype=float)
    out = np.where(x <= law.scale, 0.0, -np.expm1(law.shape * np.log(law.scale / np.maximum(x, law.scale))))
    return _scalar_or_array(out, x)


def pareto_pdf(law: ParetoLaw, x):
    """Normalized density ``a k^a x^-(a+1)`` on ``[k, inf)``, zero below."""
    x = np.asarray(x, dtype=float)
    a, k = law.shape, law.scale
    xs = np.maximum(x, k)
    out = np.where(x < k, 0.0, a / k * (k / xs) ** (a + 1.0))
    return _scalar_or_array(out, x)


def _check_uniform(u, allow_one=False):
    u = np.asarray(u, dtype=float)
    hi_ok = (u <= 1.0) if allow_one else (u < 1.0)
    if not np.all((u > 0.0) & hi_ok):
        raise ValueError("uniform variates must lie in the open interval (0, 1)")
    return u


def pareto_sample(law: ParetoLaw, u):
    """Inverse transform ``k * u**(-1/a)``; ``pareto_survival`` of the result is ``u``."""
    u = _check_uniform(u)
    return _scalar_or_array(law.scale * u ** (-1.0 / law.shape), u)


def _pareto_sample_unchecked(law: ParetoLaw, u: np.ndarray) -> np.ndarray:
    return law.scale * u ** (-1.0 / law.shape)


def pareto_mean(law: ParetoLaw) -> float:
    if law.shape <= 1.0:
        raise ValueError(f"Pareto mean is infinite for shape <= 1 (got {law.shape})")
    return law.shape * law.scale / (law.shape - 1.0)


def pareto_variance(law: ParetoLaw) -> float:
    """Variance; ``inf`` for ``shape <= 2``."""
    a, k = law.shape, law.scale
    if a <= 2.0:
        return math.inf
    return a * k * k / ((a - 1.0) ** 2 * (a - 2.0))


def pareto_residual_survival(law: ParetoLaw, x):
    """Survival of the stationary residual life ``int_x^inf P(X > u) du / E[X]``.

    This is the law of the time left in the period covering a stationary
    observation instant.  For ``1 < a < 2`` it has an infinite mean.
    """
    x = np.asarray(x, dtype=float)
    a, k = law.shape, law.scale
    xs = np.maximum(x, k)
    out = np.where(x < k, 1.0 - np.maximum(x, 0.0) * (a - 1.0) / (a * k), (k / xs) ** (a - 1.0) / a)
    return _scalar_or_array(out, x)


def pareto_residual_sample(law: ParetoLaw, u):
    """Inverse transform of :func:`pareto_residual_survival`."""
    u = _check_uniform(u)
    return _scalar_or_array(_pareto_residual_unchecked(law, u), u)


def _pareto_residual_unchecked(law: ParetoLaw, u: np.ndarray) -> np.ndarray:
    a, k = law.shape, law.scale
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > 1.0 / a, (1.0 - u) * a * k / (a - 1.0), k * (a * u) ** (-1.0 / (a - 1.0)))


# -- Bounded Pareto -----------------------------------------------------------

def bpareto_atom(law: BoundedParetoLaw) -> float:
    """Probability mass sitting exactly at the cutoff."""
    return (law.scale / law.cutoff) ** law.shape


def bpareto_survival(law: BoundedParetoLaw, x):
    """1 below ``k``, ``(k/x)**a`` on ``[k, B]``, 0 above ``B``.

    At ``x = B`` this returns the atom mass, so the survival jumps to 0 just
    after the cutoff.
    """
    x = np.asarray(x, dtype=float)
    a, k, b = law.shape, law.scale, law.cutoff
    body = (k / np.clip(x, k, b)) ** a
    out = np.where(x < k, 1.0, np.where(x > b, 0.0, body))
    return _scalar_or_array(out, x)


def bpareto_cdf(law: BoundedParetoLaw, x):
    """P(X <= x); equals 1 from the cutoff on."""
    x = np.asarray(x, dtype=float)
    a, k, b = law.shape, law.scale, law.cutoff
    body = -np.expm1(a * np.log(k / np.clip(x, k, b)))
    out = np.where(x < k, 0.0, np.where(x >= b, 1.0, body))
    return _scalar_or_array(out, x)


def bpareto_pdf(law: BoundedParetoLaw, x):
    """Continuous part of the density.

    Returns ``a k^a x^-(a+1)`` on ``[k, B)`` and 0 elsewhere.  The atom at
    ``B`` is not a density value; get it from :func:`bpareto_atom`.
    """
    x = np.asarray(x, dtype=float)
    a, k, b = law.shape, law.scale, law.cutoff
    xs = np.clip(x, k, b)
    out = np.where((x >= k) & (x < b), a / k * (k / xs) ** (a + 1.0), 0.0)
    return _scalar_or_array(out, x)


def bpareto_sample(law: BoundedParetoLaw, u):
    """Inverse transform of the mixed law.

    ``u <= (k/B)**a`` maps to the atom at ``B``; everything else to
    ``k * u**(-1/a)`` which then lies in ``[k, B)``.
    """
    u = _check_uniform(u)
    return _scalar_or_array(_bpareto_sample_unchecked(law, u), u)


def _bpareto_sample_unchecked(law: BoundedParetoLaw, u: np.ndarray) -> np.ndarray:
    x = law.scale * u ** (-1.0 / law.shape)
    return np.where(u <= bpareto_atom(law), law.cutoff, np.minimum(x, law.cutoff))


def bpareto_moment(law: BoundedParetoLaw, p: float) -> float:
    """Raw moment ``E[X**p]`` of the mixed law (continuous part plus atom)."""
    a, k, b = law.shape, law.scale, law.cutoff
    if b == k:
        return k**p
    if math.isclose(p, a):
        cont = a * k**a * math.log(b / k)
    else:
        cont = a * k**a * (b ** (p - a) - k ** (p - a)) / (p - a)
    return cont + b**p * bpareto_atom(law)


def bpareto_mean(law: BoundedParetoLaw) -> float:
    return bpareto_moment(law, 1.0)


def bpareto_variance(law: BoundedParetoLaw) -> float:
    m1 = bpareto_moment(law, 1.0)
    return max(bpareto_moment(law, 2.0) - m1 * m1, 0.0)

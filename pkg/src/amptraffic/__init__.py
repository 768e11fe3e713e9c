"""Heavy-tailed On/Off traffic sources: simulation, spectra and estimators.

A source alternates Pareto-distributed On and Off periods and transmits at a
per-period rate drawn from a Bounded-Pareto law.  Superposing many sources
gives long-range dependent traffic with Hurst exponent ``(3 - min(a0, a1))/2``.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .aggregate import (
    AggregateConfig,
    aggregate_marginal,
    aggregate_trace,
    check_capacity,
    kb_recursion,
    mc_marginal_oracle,
    snapshot_samples,
    superpose,
)
from .distributions import BoundedParetoLaw, ParetoLaw
from .estimators import (
    autocorrelation,
    gaussianity_stats,
    hill_tail_index,
    hurst_aggregated_variance,
    hurst_rescaled_range,
    hurst_spectral,
    periodogram,
)
from .onoff import (
    BinnedTrace,
    ConstantRate,
    RenewalTimeline,
    SourceConfig,
    bin_trace,
    expected_load,
    generate_timeline,
    generate_trace,
    rate_at,
    single_source_marginal,
    theoretical_hurst,
)
from .spectrum import binned_psd_model, char_fn, fit_asymptote, lrd_spectral_test, psd_model

__all__ = [
    "AggregateConfig",
    "BinnedTrace",
    "BoundedParetoLaw",
    "ConstantRate",
    "ParetoLaw",
    "RenewalTimeline",
    "SourceConfig",
    "aggregate_marginal",
    "aggregate_trace",
    "autocorrelation",
    "bin_trace",
    "binned_psd_model",
    "char_fn",
    "check_capacity",
    "expected_load",
    "fit_asymptote",
    "gaussianity_stats",
    "generate_timeline",
    "generate_trace",
    "hill_tail_index",
    "hurst_aggregated_variance",
    "hurst_rescaled_range",
    "hurst_spectral",
    "kb_recursion",
    "lrd_spectral_test",
    "mc_marginal_oracle",
    "periodogram",
    "psd_model",
    "rate_at",
    "single_source_marginal",
    "snapshot_samples",
    "superpose",
    "theoretical_hurst",
]

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amptraffic.distributions import BoundedParetoLaw, ParetoLaw, bpareto_atom, bpareto_cdf
from amptraffic.estimators import ks_distance
from amptraffic.onoff import (
    BinnedTrace,
    ConstantRate,
    RenewalTimeline,
    SourceConfig,
    bin_trace,
    expected_load,
    generate_timeline,
    generate_trace,
    on_fraction,
    rate_at,
    single_source_marginal,
    theoretical_hurst,
)
from amptraffic.streams import Purpose, open_uniform, substream

P15 = ParetoLaw(1.5, 1.0, duration=True)
BP = BoundedParetoLaw(1.2, 1.0, 10.0)


def make_source(seed=0, rate=BP, on=P15, off=P15, stream=0):
    return SourceConfig(on, off, rate, seed=seed, stream=stream)


def timeline_from(intervals, horizon):
    s = np.array([i[0] for i in intervals], dtype=float)
    x = np.array([i[1] for i in intervals], dtype=float)
    a = np.array([i[2] for i in intervals], dtype=float)
    y = np.append(np.diff(s) - x[:-1], 1.0) if len(s) else np.empty(0)
    return RenewalTimeline(starts=s, on=x, off=y, rates=a, horizon=horizon)


class TestConfig:
    def test_rejects_bad_duration_shape(self):
        with pytest.raises(ValueError):
            SourceConfig(ParetoLaw(2.5, 1.0), P15)
        with pytest.raises(ValueError):
            SourceConfig(P15, ParetoLaw(0.9, 1.0))

    def test_rejects_bad_rate(self):
        with pytest.raises(TypeError):
            SourceConfig(P15, P15, 3.0)
        with pytest.raises(ValueError):
            ConstantRate(0.0)


class TestTimeline:
    def test_regeneration_recurrence_bitwise(self):
        tl = generate_timeline(make_source(3), 1e6)
        assert np.array_equal(tl.starts[1:], tl.starts[:-1] + (tl.on[:-1] + tl.off[:-1]))
        assert tl.starts[0] == 0.0
        assert tl.starts[-1] < 1e6 <= tl.starts[-1] + tl.on[-1] + tl.off[-1]

    def test_deterministic(self):
        a = generate_timeline(make_source(5), 1e5)
        b = generate_timeline(make_source(5), 1e5)
        for f in ("starts", "on", "off", "rates"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_prefix_property(self):
        short = generate_timeline(make_source(5), 1e4)
        long = generate_timeline(make_source(5), 1e5)
        n = len(short)
        assert np.array_equal(short.starts, long.starts[:n])
        assert np.array_equal(short.rates, long.rates[:n])

    def test_mean_on_duration(self):
        tl = generate_timeline(make_source(11), 2e6)
        assert len(tl) >= 10**5
        # infinite variance makes the sample mean noisy; 5% matches the stated tolerance
        assert np.mean(tl.on) == pytest.approx(3.0, rel=0.05)

    def test_constant_rate_values(self):
        tl = generate_timeline(make_source(2, rate=ConstantRate(2.5)), 1e4)
        assert np.all(tl.rates == 2.5)
        assert set(np.unique(rate_at(tl, np.linspace(0, 1e4, 1000, endpoint=False)))) <= {0.0, 2.5}

    def test_rates_within_bounds(self):
        tl = generate_timeline(make_source(2), 1e5)
        assert tl.rates.min() >= 1.0 and tl.rates.max() <= 10.0
        assert np.any(tl.rates == 10.0)

    def test_on_fraction_of_time(self):
        src = make_source(8, on=ParetoLaw(1.5, 1.0, duration=True), off=ParetoLaw(1.5, 2.0, duration=True))
        tl = generate_timeline(src, 1e7, start="stationary")
        assert len(tl) >= 10**5
        on_time = np.sum(np.clip(tl.ends, 0, tl.horizon) - np.clip(tl.starts, 0, tl.horizon))
        assert on_time / tl.horizon == pytest.approx(on_fraction(src), rel=0.05)

    def test_stationary_start_fraction(self):
        # across many sources the fraction On at t = 0 is the long-run on-fraction
        n = 4000
        on = 0
        for i in range(n):
            tl = generate_timeline(make_source(0, stream=i), 10.0, start="stationary")
            on += tl.on[0] > 0
        assert on / n == pytest.approx(0.5, abs=3 * math.sqrt(0.25 / n))

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_timeline(make_source(), 0.0)
        with pytest.raises(ValueError):
            generate_timeline(make_source(), 10.0, start="middle")


class TestRateAt:
    def test_half_open_boundaries(self):
        tl = generate_timeline(make_source(4), 1e4)
        j = 5
        assert rate_at(tl, tl.starts[j]) == tl.rates[j]
        assert rate_at(tl, tl.starts[j] + tl.on[j]) == 0.0

    def test_out_of_range(self):
        tl = generate_timeline(make_source(4), 100.0)
        for t in (-1e-9, 100.0, math.nan):
            with pytest.raises(ValueError):
                rate_at(tl, t)

    def test_vectorized(self):
        tl = timeline_from([(0.0, 1.0, 2.0), (3.0, 1.0, 4.0)], 10.0)
        assert np.array_equal(rate_at(tl, [0.0, 0.5, 1.0, 3.5, 4.0, 9.9]), [2.0, 2.0, 0.0, 4.0, 0.0, 0.0])


class TestBinning:
    def test_half_bin_interval(self):
        tl = timeline_from([(0.0, 0.5, 3.0)], 4.0)
        tr = bin_trace(tl, 1.0)
        assert tr.values[0] == 1.5
        assert np.all(tr.values[1:] == 0.0)

    def test_all_off(self):
        tl = timeline_from([(0.0, 0.0, 3.0)], 10.0)
        assert np.all(bin_trace(tl, 1.0).values == 0.0)

    def test_interval_spanning_bins(self):
        tl = timeline_from([(0.25, 2.5, 2.0)], 4.0)
        assert np.allclose(bin_trace(tl, 1.0).values, [1.5, 2.0, 1.5, 0.0], rtol=0, atol=1e-15)

    def test_length_and_partial_last_bin(self):
        # the interval runs past the horizon; the last bin holds [10, 10.5) over a full width
        tl = timeline_from([(0.0, 20.0, 1.0)], 10.5)
        tr = bin_trace(tl, 1.0)
        assert len(tr) == math.ceil(10.5 / 1.0)
        assert tr.values[-1] == pytest.approx(0.5)
        assert tr.volume == pytest.approx(10.5, rel=1e-15)

    def test_bad_delta(self):
        tl = timeline_from([(0.0, 1.0, 1.0)], 10.0)
        for d in (0.0, -1.0, 11.0):
            with pytest.raises(ValueError):
                bin_trace(tl, d)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32), st.floats(0.05, 50.0), st.floats(1e2, 1e4))
    def test_volume_conservation(self, seed, delta, horizon):
        tl = generate_timeline(make_source(seed), horizon)
        delta = min(delta, horizon)
        tr = bin_trace(tl, delta)
        exact = tl.volume()
        assert tr.volume == pytest.approx(exact, rel=1e-9)
        assert tr.values.min() >= 0.0
        assert tr.values.max() <= 10.0 * (1 + 1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_refinement_consistency(self, seed):
        tl = generate_timeline(make_source(seed), 4096.0)
        coarse = bin_trace(tl, 2.0).values
        fine = bin_trace(tl, 1.0).values
        # float association differs between the two grids, so equal to rounding
        assert np.allclose(coarse, fine.reshape(-1, 2).mean(axis=1), rtol=1e-12, atol=1e-12)

    def test_generate_trace_burn_in(self):
        src = make_source(9)
        tr = generate_trace(src, 1000, 0.5, burn_in=100.0)
        assert len(tr) == 1000 and tr.origin == 100.0 and tr.bin_width == 0.5
        tl = generate_timeline(src, 600.0)
        assert np.allclose(tr.values, bin_trace(tl, 0.5, origin=100.0).values, rtol=1e-12)


class TestTheory:
    @pytest.mark.parametrize("a0,a1,h", [(1.2, 1.5, 0.9), (2.0, 2.0, 0.5), (1.5, 1.9, 0.75)])
    def test_hurst_examples(self, a0, a1, h):
        assert theoretical_hurst(a0, a1) == pytest.approx(h)

    @given(st.floats(1.01, 2.0), st.floats(1.01, 2.0))
    def test_hurst_symmetric_and_in_range(self, a, b):
        h = theoretical_hurst(a, b)
        assert h == theoretical_hurst(b, a)
        assert 0.5 <= h < 1.0
        assert (h > 0.5) == (min(a, b) < 2.0)

    @pytest.mark.parametrize("a", [1.0, 0.5, 2.1])
    def test_hurst_rejects(self, a):
        with pytest.raises(ValueError):
            theoretical_hurst(a, 1.5)

    def test_marginal_symmetric_atom(self):
        m = single_source_marginal(make_source())
        assert m.atom_at_zero == pytest.approx(0.5)
        assert m.total_mass() == pytest.approx(1.0, abs=1e-6)
        assert dict(m.point_masses)[10.0] == pytest.approx(0.5 * bpareto_atom(BP))

    def test_marginal_on_probability(self):
        # mu1 = 3, mu0 = 1
        src = make_source(on=ParetoLaw(1.5, 1.0, duration=True), off=ParetoLaw(1.5, 1 / 3, duration=True),
                          rate=ConstantRate(1.0))
        m = single_source_marginal(src)
        assert 1.0 - m.atom_at_zero == pytest.approx(0.75)
        assert m.mean() == pytest.approx(0.75)
        assert m.total_mass() == pytest.approx(1.0, abs=1e-6)

    def test_marginal_cdf(self):
        m = single_source_marginal(make_source())
        assert m.cdf(-1.0) == 0.0
        assert m.cdf(0.0) == pytest.approx(0.5)
        assert m.cdf(10.0) == pytest.approx(1.0)

    def test_expected_load_constant(self):
        assert expected_load(make_source(rate=ConstantRate(4.0))) == pytest.approx(2.0)

    def test_expected_load_vs_long_run(self):
        src = make_source(21)
        horizon = 3e6
        tl = generate_timeline(src, horizon, start="stationary")
        assert len(tl) >= 4 * 10**5
        assert tl.volume() / horizon == pytest.approx(expected_load(src), rel=0.02)

    def test_snapshot_matches_marginal(self):
        # stationary sources sampled after a burn-in of 10 mean cycles
        base = make_source(on=ParetoLaw(1.5, 1.0, duration=True), off=ParetoLaw(1.5, 2.0, duration=True))
        burn, span = 10 * base.cycle_mean, 200 * base.cycle_mean
        vals = []
        for i in range(1000):
            tl = generate_timeline(make_source(1, stream=i, on=base.on_law, off=base.off_law), burn + span,
                                   start="stationary")
            vals.append(rate_at(tl, burn + span * open_uniform(substream(1, i, Purpose.SNAPSHOT), 100)))
        x = np.concatenate(vals)
        m = single_source_marginal(base)
        assert abs(np.mean(x == 0) - m.atom_at_zero) < 0.01
        nz = x[x > 0]
        left = lambda v: np.where(v >= 10.0, 1 - bpareto_atom(BP), bpareto_cdf(BP, v))  # noqa: E731
        assert ks_distance(nz, lambda v: bpareto_cdf(BP, v), left) < 0.02


def test_binned_trace_volume():
    tr = BinnedTrace(0.5, np.array([1.0, 2.0, 3.0]))
    assert tr.volume == 3.0 and len(tr) == 3

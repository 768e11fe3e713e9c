from __future__ import annotations

import numpy as np
import pytest

from amptraffic.validation import Context

ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def validation_context() -> Context:
    """One shared context so the long Hurst traces are generated once per session."""
    return Context(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def hurst_table(validation_context):
    """R/S, aggregated-variance and spectral H for every acceptance trace, keyed by design row."""
    from amptraffic.estimators import hurst_aggregated_variance, hurst_rescaled_range, hurst_spectral
    from amptraffic.validation import HURST_DESIGN, HURST_SEEDS, MIN_SCALE

    table = {}
    for a0, a1, m, delta, _ in HURST_DESIGN:
        rows = []
        for i in range(HURST_SEEDS):
            x = validation_context.hurst_trace(a0, a1, m, delta, i)
            rows.append((hurst_rescaled_range(x, min_scale=MIN_SCALE).value,
                         hurst_aggregated_variance(x, min_scale=MIN_SCALE).value,
                         hurst_spectral(x).value))
        table[(a0, a1)] = np.array(rows)
    return table

"""Acceptance criteria, one test per criterion at the stated tolerances.

Each test runs the matching validation check (the same code path as
``amptraffic validate``) and prints a single ``[PASS]``/``[FAIL]`` line; the
individual check rows go into the assertion message.  The lines are repeated
in an "acceptance criteria" section of the terminal summary.
"""
from __future__ import annotations

import pytest

from amptraffic.validation import CHECKS, run_validation

from conftest import ACCEPTANCE_LINES

CRITERIA = {
    1: ("hurst-recovery", "H recovered by R/S and aggregated variance across the design"),
    2: ("spectral-asymptote", "low-frequency PSD slope and level"),
    3: ("autocorrelation-decay", "autocorrelation decays as a power law with exponent 2 - 2H"),
    4: ("single-source-marginal", "single-source rate marginal matches the mixture law"),
    5: ("aggregate-marginal", "aggregate marginal: atom, k_B(N) and L1 against Monte Carlo"),
    6: ("gaussianization", "skewness shrinks as sources are added"),
    7: ("distribution-layer", "Pareto and Bounded-Pareto samplers"),
    8: ("determinism", "fixed seed gives identical output"),
}


def test_every_check_is_covered():
    assert {name for name, _ in CRITERIA.values()} == set(CHECKS)
    assert all(CHECKS[name][0] == k for k, (name, _) in CRITERIA.items())


@pytest.mark.slow
@pytest.mark.parametrize("criterion", sorted(CRITERIA), ids=lambda k: f"criterion-{k}-{CRITERIA[k][0]}")
def test_criterion(criterion, validation_context, request):
    name, title = CRITERIA[criterion]
    report = run_validation([name], context=validation_context)
    ok = report.criteria()[criterion]
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {title}"
    request.config.stash.setdefault(ACCEPTANCE_LINES, []).append(line)
    print("\n" + line)
    rows = "\n".join(
        f"  {'ok  ' if r.passed else 'FAIL'} {r.name}: observed {r.observed} expected {r.expected} tol {r.tolerance}"
        + (f" ({r.detail})" if r.detail else "")
        for r in report.records
    )
    assert ok, f"criterion {criterion} failed:\n{rows}"

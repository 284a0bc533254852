"""Acceptance criteria 1-12 at their stated tolerances, one report line per criterion."""
import pytest

from qlab.acceptance import CHECKS, run_criterion

MONTE_CARLO = {8, 9, 10, 11, 12}


@pytest.mark.parametrize(
    "k", [pytest.param(k, marks=pytest.mark.slow) if k in MONTE_CARLO else k for k in sorted(CHECKS)])
def test_criterion(k, record_acceptance):
    rows = run_criterion(k)
    passed = all(r.passed for r in rows)
    failing = [r.name for r in rows if not r.passed]
    summary = f"criterion {k:>2} {'PASS' if passed else 'FAIL'}  {len(rows) - len(failing)}/{len(rows)} checks"
    if failing:
        summary += f"  failing: {', '.join(failing)}"
    record_acceptance(k, summary)
    for r in rows:
        print("   ", r.line())
    assert passed, "\n".join(r.line() for r in rows if not r.passed)

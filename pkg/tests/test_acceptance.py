"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured headline
value and its tolerance, then asserts the check and its runtime budget.
Run with ``pytest tests/test_acceptance.py -v`` to see the lines.
"""

from __future__ import annotations

import subprocess
import sys
import time

import pytest

from gaugeweave import checks

SEED = 7

# criterion number -> (check name, runtime budget in seconds or None)
CRITERIA = {
    1: ("closure", 10.0),
    2: ("gauge_splitting", 30.0),
    3: ("prepost_degeneracy", None),
    4: ("berry_phase_oracle", 5.0),
    5: ("curvature_sourcing", 20.0),
    6: ("mutual_curvature_closed_form", None),
    7: ("momentum_hermiticity", None),
    8: ("adiabatic_theorem", 60.0),
    9: ("rate_totality", None),
    10: ("ab_phase", 30.0),
    11: ("mutual_locality", None),
    12: ("well_profiles", 5.0),
}


def _report(capsys, number: int, line: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {line}")


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    name, budget = CRITERIA[number]
    start = time.perf_counter()
    result = checks.run_check(name, SEED)
    elapsed = time.perf_counter() - start
    _report(capsys, number, f"{result.line()} runtime={elapsed:.1f}s")
    failing = {k: v for k, v in result.details.items()
               if isinstance(v, dict) and v.get("passed") is False}
    assert result.passed, f"{name} failed: {failing}"
    if budget is not None:
        assert elapsed < budget, f"{name} took {elapsed:.1f}s (budget {budget:.0f}s)"


def test_criterion_13_reproducible_reports(tmp_path, capsys):
    reports = []
    for run in ("first", "second"):
        out = tmp_path / run
        subprocess.run([sys.executable, "-m", "gaugeweave", "suite", "--suite", "all",
                        "--seed", str(SEED), "--out", str(out)], capture_output=True, check=False)
        reports.append((out / "suite_report.json").read_bytes())
    same = reports[0] == reports[1]
    status = "PASS" if same else "FAIL"
    _report(capsys, 13, f"{status} cli_reproducibility: identical={same}")
    assert same

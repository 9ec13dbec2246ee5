from __future__ import annotations

import os
import sys
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sonicpatch.config import SolverConfig  # noqa: E402
from sonicpatch.pipeline import Run, verify_reports  # noqa: E402

REFERENCE_CFG = os.path.join(os.path.dirname(os.path.dirname(__file__)), "configs", "reference.cfg")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def reference_run():
    return Run(SolverConfig())


@pytest.fixture(scope="session")
def refinement_runs():
    """Reference config at refinement levels 1, 2 and 4 (march and diagnostics)."""
    runs = {}
    for k in (1, 2, 4):
        run = Run(SolverConfig().with_refine(k))
        run.diagnostics
        runs[k] = run
    return runs


@pytest.fixture(scope="session")
def wave_run():
    """``s0 = 0``: the BC data then continues the wave, so every product is known exactly."""
    return Run(SolverConfig(s0=0.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def verify_timed():
    """Identity reports and canaries on the reference config, timed from a cold start."""
    t = time.perf_counter()
    run = Run(SolverConfig())
    reports, cans = verify_reports(run.config, run)
    return reports, cans, time.perf_counter() - t


@pytest.fixture(scope="session")
def verify_products(verify_timed):
    return verify_timed[:2]

import math
import time

import numpy as np
import pytest

from jctraj.dynamics import SimParams, master_equation_series, uniform_times
from jctraj.ensemble import run_ensemble

SWEEP = (0.02, 0.2, 2.0, 20.0, 200.0)
SWEEP_TRAJECTORIES = 10_000
SWEEP_SEED = 42
# the default 200-point grid plus the quarter and half cycle
SAMPLE_TIMES = np.union1d(uniform_times(SimParams()), [math.pi / 4, math.pi / 2])

_acceptance_lines = []


@pytest.fixture(scope="session")
def sweep_oracles():
    """gamma -> (times, joint density matrices) from the RK4 reference."""
    out = {}
    for g in SWEEP:
        start = time.perf_counter()
        times, series = master_equation_series(SimParams.driven(g), SAMPLE_TIMES)
        out[g] = (times, series, time.perf_counter() - start)
    return out


@pytest.fixture(scope="session")
def sweep_ensembles():
    """gamma -> (EnsembleResult, wall seconds) for the five-point sweep."""
    out = {}
    for g in SWEEP:
        start = time.perf_counter()
        result = run_ensemble(SimParams.driven(g), SWEEP_TRAJECTORIES, SWEEP_SEED, SAMPLE_TIMES)
        out[g] = (result, time.perf_counter() - start)
    return out


@pytest.fixture
def criterion():
    """Record a named acceptance check, then assert it."""

    def check(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        _acceptance_lines.append(line)
        print(line)
        assert passed, detail

    return check


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)

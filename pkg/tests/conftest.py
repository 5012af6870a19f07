import time

import pytest

from patbeam.optimizer import OptimizerConfig, optimize_pattern

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance check for the run summary."""

    def record(tag, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {tag}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


_OPTIMIZED = {}


@pytest.fixture(scope="session")
def optimized_256():
    """Optimized N=256 patterns (lambda = 1, 1, 1), built once per session."""

    def get(m):
        if m not in _OPTIMIZED:
            t0 = time.perf_counter()
            res = optimize_pattern(256, m, OptimizerConfig())
            _OPTIMIZED[m] = (res, time.perf_counter() - t0)
        return _OPTIMIZED[m]

    return get


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

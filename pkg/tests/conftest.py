from __future__ import annotations

import pytest

from chartopt.chart_model import DataTable, TaskSpec, default_spec
from chartopt.ingestion import bundled_fixtures
from chartopt.objective import Evaluator


@pytest.fixture(scope="session")
def fixtures():
    return bundled_fixtures()


@pytest.fixture(scope="session")
def evaluator():
    return Evaluator()


@pytest.fixture
def table5():
    return DataTable((("Bus", 105.0), ("Domestic flight", 246.0), ("Ferry", 19.0),
                      ("Medium car", 171.0), ("Bike", 0.0)))


@pytest.fixture
def cp_spec(table5):
    return default_spec(table5, TaskSpec("CP", ("Bus", "Domestic flight")))


def pytest_configure(config):
    config._acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._acceptance_lines[number] = line
        print(line)
        return ok

    return _report

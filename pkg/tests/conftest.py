import pytest

from redist.core import LambdaParams, Problem

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def three_agents():
    """Three agents, incomes (2, 2, 10), needs (1, 4, 0)."""
    return Problem([2, 2, 10], [1, 4, 0])


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


LAMBDA_CORNERS = {"L": LambdaParams(1, 0), "F": LambdaParams(0, 1), "A": LambdaParams(0, 0)}

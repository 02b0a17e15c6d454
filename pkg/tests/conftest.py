import pytest

from betaedge.rng import RngStream

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def stream():
    return RngStream(20240917, 0)


@pytest.fixture
def verdict():
    """Record one acceptance line, print it, then assert it."""

    def record(label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion; returns the verdict."""
    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'} - {title}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

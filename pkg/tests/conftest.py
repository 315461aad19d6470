import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(number: int, name: str, passed: bool, detail: str, seconds: float):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail} [{seconds:.2f} s]"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

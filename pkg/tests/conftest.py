import pytest

ACCEPTANCE_LINES: dict[int, list[str]] = {}


@pytest.fixture
def acceptance_record():
    def record(number: int, lines: list[str]) -> None:
        ACCEPTANCE_LINES[number] = lines

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        for line in ACCEPTANCE_LINES[number]:
            terminalreporter.write_line(line)

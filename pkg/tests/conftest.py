import pytest

_VERDICTS = {}


class Verdicts:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, number, label, passed, detail=""):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {label}"
        if detail:
            line += f": {detail}"
        _VERDICTS[number] = line
        print(line)
        return passed


@pytest.fixture(scope="session")
def verdicts():
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[number])

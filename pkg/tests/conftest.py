"""Shared fixtures; acceptance verdicts are echoed in the terminal summary."""

import pytest

_VERDICTS: dict[str, tuple[bool, str]] = {}


class Verdicts:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, label: str, passed: bool, detail: str) -> bool:
        _VERDICTS[label] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
        return bool(passed)


@pytest.fixture(scope="session")
def verdicts() -> Verdicts:
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_VERDICTS):
        passed, detail = _VERDICTS[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")

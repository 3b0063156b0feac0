"""Collects acceptance verdicts and prints one line per criterion after the run."""

import pytest

VERDICTS: dict = {}


class Recorder:
    def __call__(self, number: int, name: str, ok: bool, detail: str = "") -> bool:
        VERDICTS[number] = ("PASS" if ok else "FAIL", name, detail)
        print(f"[acceptance {number}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok

    def not_run(self, number: int, name: str, reason: str) -> None:
        VERDICTS[number] = ("NOT RUN", name, reason)


@pytest.fixture
def verdict():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        status, name, detail = VERDICTS[number]
        terminalreporter.write_line(f"{number:>2} {status:<7} {name}: {detail}")

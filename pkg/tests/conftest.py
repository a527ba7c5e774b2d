import time

import pytest

_LINES = []


class Recorder:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.start = time.perf_counter()
        self.details = []
        self.ok = True

    def expect(self, ok, detail):
        ok = bool(ok)
        self.ok &= ok
        self.details.append(("" if ok else "FAILED ") + detail)
        return ok

    def finish(self, budget):
        took = time.perf_counter() - self.start
        self.expect(took < budget, f"{took:.2f}s of {budget:g}s budget")
        line = f"criterion {self.number:2d} {'PASS' if self.ok else 'FAIL'}  {self.title}: " + "; ".join(self.details)
        _LINES.append((self.number, line))
        print(line)
        assert self.ok, line


@pytest.fixture
def criterion():
    return Recorder


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)

import time

import pytest

_LINES: list[str] = []


class Criterion:
    """Times one acceptance criterion and records a PASS/FAIL line."""

    def __init__(self, number: int, title: str, limit: float):
        self.number, self.title, self.limit = number, title, limit
        self.notes: list[str] = []
        self.extra_seconds = 0.0

    def note(self, text: str) -> None:
        self.notes.append(text)

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.seconds = time.perf_counter() - self.t0 + self.extra_seconds
        slow = self.seconds >= self.limit
        ok = exc_type is None and not slow
        status = "PASS" if ok else "FAIL"
        detail = "; ".join(self.notes)
        if exc_type is not None:
            detail = (detail + "; " if detail else "") + f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        if slow:
            detail = (detail + "; " if detail else "") + f"over the {self.limit:g}s limit"
        line = f"[{status}] criterion {self.number:2d}: {self.title} ({self.seconds:.2f}s) {detail}".rstrip()
        _LINES.append(line)
        print(line)
        if exc_type is None and slow:
            raise AssertionError(f"criterion {self.number} took {self.seconds:.1f}s (limit {self.limit:g}s)")
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

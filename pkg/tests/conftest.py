import time

import pytest


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_fmt(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


class Criterion:
    """
    Collects measurements and requirements for one acceptance criterion and
    prints a single PASS/FAIL line when the block ends.
    """

    def __init__(self, name, limit, emit):
        self.name = name
        self.limit = limit
        self.emit = emit
        self.values = {}
        self.failures = []

    def record(self, **values):
        self.values.update(values)

    def require(self, ok, message):
        if not ok:
            self.failures.append(message)

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc is not None:
            self.failures.append(f"{exc_type.__name__}: {exc}")
        if self.limit is not None and elapsed > self.limit:
            self.failures.append(f"took {elapsed:.1f}s, limit {self.limit:g}s")
        status = "FAIL" if self.failures else "PASS"
        detail = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        line = f"[{status}] {self.name}: {detail} ({elapsed:.2f}s)"
        if self.failures:
            line += " -- " + "; ".join(self.failures)
        self.emit(line)
        if exc is None and self.failures:
            pytest.fail(line, pytrace=False)
        return False


@pytest.fixture
def criterion(capsys):
    def emit(line):
        with capsys.disabled():
            print("\n" + line, flush=True)

    def make(name, limit=None):
        return Criterion(name, limit, emit)

    return make

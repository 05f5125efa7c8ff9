import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "pinned",
    max_examples=100,
    derandomize=True,
    deadline=None,
    print_blob=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("long", max_examples=1000, derandomize=False, deadline=None)
settings.load_profile(os.environ.get("DAERELAX_HYPOTHESIS", "pinned"))


import contextlib
import time

import pytest

_CRITERIA: list = []


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion as PASS or FAIL."""

    @contextlib.contextmanager
    def record(number, title):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            _CRITERIA.append((number, title, False, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}"))
            raise
        _CRITERIA.append((number, title, True, time.perf_counter() - t0, ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, dt, why in sorted(_CRITERIA, key=lambda c: c[0]):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({dt:.2f} s)"
        if why:
            line += f"  -- {why.splitlines()[0][:200]}"
        terminalreporter.write_line(line)

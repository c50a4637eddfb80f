import contextlib
import time

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion():
    """``with criterion(n, title):`` records a pass/fail line for acceptance criterion ``n``."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            _RESULTS[number] = ("FAIL", f"{title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            print(f"criterion {number}: FAIL  {title}")
            raise
        took = time.perf_counter() - start
        _RESULTS[number] = ("PASS", f"{title} ({took:.1f} s)")
        print(f"criterion {number}: PASS  {title}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, text = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {text}")

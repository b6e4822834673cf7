import time
from contextlib import contextmanager

import pytest

_LOG = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LOG] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LOG, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """``with criterion(n, title, budget_s): ...`` records one PASS/FAIL line.

    The block fails the criterion by raising; exceeding the runtime budget
    fails it afterwards.
    """
    log = request.config.stash[_LOG]

    @contextmanager
    def run(number: int, title: str, budget: float):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            log.append(f"criterion {number}: FAIL  {title} ({elapsed:.2f}s; {type(exc).__name__}: {exc})".splitlines()[0])
            print(log[-1])
            raise
        elapsed = time.perf_counter() - start
        ok = elapsed < budget
        log.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title} ({elapsed:.2f}s, budget {budget:g}s)")
        print(log[-1])
        assert ok, f"runtime {elapsed:.2f}s exceeds the {budget:g}s budget"

    return run

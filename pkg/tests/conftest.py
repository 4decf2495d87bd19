"""Shared fixtures and the per-criterion acceptance summary."""
from __future__ import annotations

import time

import pytest

from pucci_lane_emden.core import ProblemParams

_RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS_KEY] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    crit = int(mark.args[0])
    entry = item.config.stash[_RESULTS_KEY].setdefault(
        crit, {"ok": True, "tests": [], "seconds": 0.0})
    entry["tests"].append((item.name, rep.outcome))
    entry["seconds"] += rep.duration
    if not rep.passed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    res = config.stash[_RESULTS_KEY]
    if not res:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(res):
        e = res[crit]
        failed = [n for n, o in e["tests"] if o != "passed"]
        status = "PASS" if e["ok"] else "FAIL"
        extra = f" ({', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {crit:2d}: {status}  [{len(e['tests'])} checks, "
                      f"{e['seconds']:.1f} s]{extra}")


@pytest.fixture
def lap3():
    """Laplacian case in dimension three with the critical exponents."""
    return ProblemParams(1.0, 1.0, 3, 5.0, 5.0)


@pytest.fixture
def stopwatch():
    class _SW:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.elapsed = time.perf_counter() - self.t0
            return False

    return _SW

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from nlpd.model import JobOption, JobSpec, OnGapInstance

settings.register_profile("nlpd", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nlpd")

ALPHAS = (1.5, 2.0, 3.0)


@st.composite
def ongap_instances(draw, max_jobs=6, max_machines=4, unit=False, costs=True):
    alpha = draw(st.sampled_from(ALPHAS))
    m = draw(st.integers(1, max_machines))
    n = draw(st.integers(0, max_jobs))
    jobs = []
    for _ in range(n):
        machines = draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m, unique=True))
        opts = []
        for e in sorted(machines):
            load = draw(st.floats(0.1, 10.0))
            cost = draw(st.floats(0.0, 5.0)) if costs else 0.0
            opts.append(JobOption(e, load, cost))
        demand = 1.0 if unit else draw(st.floats(0.25, 3.0))
        jobs.append(JobSpec(tuple(opts), demand))
    return OnGapInstance(alpha, m, tuple(jobs))


def rel_close(a, b, rtol):
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, printed after the run
_criteria: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in sorted(_criteria.items(), key=lambda kv: int(kv[0].split("_")[1])):
        terminalreporter.write_line(f"{verdict}  {name}")

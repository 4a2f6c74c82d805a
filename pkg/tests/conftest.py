import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from inls.grid import RadialGrid
from inls.params import ModelParams

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref_grid():
    return RadialGrid(12.0, 8192)


@pytest.fixture(scope="session")
def small_grid():
    return RadialGrid(12.0, 1024)


@pytest.fixture(scope="session")
def radial_params():
    return ModelParams(1.0, 0.5, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if m and rep.when in ("call", "setup"):
                detail = dict(rep.user_properties).get("detail", "")
                rows[int(m.group(1))] = ("PASS" if outcome == "passed" else "FAIL", detail)
    if rows:
        terminalreporter.section("acceptance criteria")
        for k in sorted(rows):
            status, detail = rows[k]
            terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}")

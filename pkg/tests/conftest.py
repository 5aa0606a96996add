import json
import sys

import numpy as np
import pytest
from hypothesis import settings

from ebound import catalog

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def staircase():
    return catalog.get("staircase").spec


@pytest.fixture
def oscillatory():
    return catalog.get("oscillatory").spec


@pytest.fixture
def quadratic():
    return catalog.get("quadratic").spec


@pytest.fixture
def absval():
    return catalog.get("absval").spec


@pytest.fixture
def write_json(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return str(path)
    return write


def random_grid(rng, n=None, inf_frac=0.1):
    from ebound.fnmodel import GridSpec
    n = n or int(rng.integers(2, 4097))
    vals = rng.random(n)
    vals[rng.random(n) < inf_frac] = np.inf
    if not np.isfinite(vals).any():
        vals[rng.integers(n)] = rng.random()
    return GridSpec(float(rng.uniform(-5, 5)), float(10 ** rng.uniform(-4, 0)), vals)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {detail}")

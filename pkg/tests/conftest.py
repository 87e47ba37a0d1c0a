import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from magnav import _backend
from magnav.fieldmap import GaussianSource, GridMap, generate_gaussian_map

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=_backend.available_backends())
def backend(request):
    """Run the test once per available kernel backend."""
    prev = _backend.current_backend()
    _backend.use_backend(request.param)
    yield request.param
    _backend.use_backend(prev)


def grid_from_fn(fn, x0, x1, y0, y1, res):
    nx = int(round((x1 - x0) / res)) + 1
    ny = int(round((y1 - y0) / res)) + 1
    xs = x0 + np.arange(nx) * res
    ys = y0 + np.arange(ny) * res
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return GridMap(x0, y0, res, fn(X, Y))


def random_gaussian_map(rng, n_sources=4, bounds=(-3.0, 3.0, -3.0, 3.0), res=0.25):
    x0, x1, y0, y1 = bounds
    sources = [GaussianSource(rng.uniform(x0, x1), rng.uniform(y0, y1),
                              rng.uniform(-2500, 2500), rng.uniform(0.4, 1.2))
               for _ in range(n_sources)]
    return generate_gaussian_map(sources, bounds, res)


def constant_map(value=45000.0, bounds=(-3.0, 3.0, -3.0, 3.0), res=0.25):
    return generate_gaussian_map([], bounds, res, baseline=value)


def deg(a):
    return math.radians(a)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records one acceptance line for the summary."""
    def record(n, ok, detail):
        request.config.stash.setdefault(ACCEPTANCE, {})[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

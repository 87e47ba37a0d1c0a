"""The compiled kernels and the pure-Python fallback must agree bit for bit."""
import math

import numpy as np
import pytest

from magnav import _backend, _pykernels
from magnav.obs_planner import ObsPlannerConfig, tie_break_order

from conftest import random_gaussian_map

pytestmark = pytest.mark.skipif("compiled" not in _backend.available_backends(),
                                reason="compiled kernels not built")


@pytest.fixture(scope="module")
def compiled():
    from magnav import _kernels
    return _kernels


def _args(m):
    return m.values, m.origin_x, m.origin_y, m.resolution


@pytest.mark.parametrize("seed", range(5))
def test_field_and_stencil(compiled, seed):
    rng = np.random.default_rng(seed)
    m = random_gaussian_map(rng)
    # includes points just outside the lattice and exact nodes
    xs = np.concatenate([rng.uniform(-3.2, 3.2, 300), np.arange(-3.0, 3.01, 0.25)])
    ys = np.concatenate([rng.uniform(-3.2, 3.2, 300), np.arange(-3.0, 3.01, 0.25)])
    a = compiled.field_batch(*_args(m), xs, ys)
    b = _pykernels.field_batch(*_args(m), xs, ys)
    assert np.array_equal(a, b, equal_nan=True)
    for x, y in zip(xs, ys):
        sa = compiled.stencil_derivs(*_args(m), float(x), float(y))
        sb = _pykernels.stencil_derivs(*_args(m), float(x), float(y))
        assert np.array_equal(sa, sb, equal_nan=True)
        assert compiled.field_scalar(*_args(m), float(x), float(y)) == \
            _pykernels.field_scalar(*_args(m), float(x), float(y)) or math.isnan(sa[0])


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("terminal", [False, True])
def test_dp_plan(compiled, seed, terminal):
    rng = np.random.default_rng(100 + seed)
    m = random_gaussian_map(rng)
    cfg = ObsPlannerConfig(goal=(2.0, -1.0), det_ref=float(rng.uniform(1e8, 1e11)))
    omegas = np.array([cfg.action_set[i] for i in tie_break_order(cfg.action_set)])
    wg, wo, eps = cfg.kernel_weights()
    x, y, th = rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-math.pi, math.pi)
    args = (*_args(m), x, y, th, 0.2, 1.0, omegas, 4, 2.0, -1.0, wg, wo, eps, terminal)
    ca, sa = compiled.dp_plan(*args)
    cb, sb = _pykernels.dp_plan(*args)
    assert ca == cb
    assert np.array_equal(sa, sb)


@pytest.mark.parametrize("seed", range(10))
def test_systematic_indices(compiled, seed):
    rng = np.random.default_rng(seed)
    w = rng.random(257) ** 4
    w /= w.sum()
    u0 = float(rng.random())
    assert np.array_equal(compiled.systematic_indices(w, u0), _pykernels.systematic_indices(w, u0))


def test_scalar_helpers(compiled):
    for a in (-7.0, -math.pi, 0.0, math.pi, 3 * math.pi, 1e3):
        assert compiled.wrap_angle(a) == _pykernels.wrap_angle(a)
    assert compiled.gramian_det_2x2(1.5, -2.0, 0.25, 3.0) == _pykernels.gramian_det_2x2(1.5, -2.0, 0.25, 3.0)


def test_use_backend_switch():
    start = _backend.current_backend()
    try:
        _backend.use_backend("python")
        assert _backend.get_kernels() is _pykernels
        with pytest.raises(ValueError):
            _backend.use_backend("fortran")
    finally:
        _backend.use_backend(start)

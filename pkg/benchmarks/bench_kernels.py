"""Time the compiled kernels against the pure-Python fallback.

Run from the repository root after building the extension::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time per call for both backends, the speed-up,
and whether the two produced identical output.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from magnav import _backend
from magnav.obs_planner import ObsPlannerConfig, tie_break_order
from magnav.scenarios import lab_map


def _cases(m, rng):
    vals, ox, oy, res = m.values, m.origin_x, m.origin_y, m.resolution
    xs = rng.uniform(-2.5, 2.5, 20_000)
    ys = rng.uniform(-2.0, 2.0, 20_000)
    w = rng.random(1000)
    w /= w.sum()
    cfg = ObsPlannerConfig(goal=(1.8, -1.2), det_ref=5e10)
    omegas = np.array([cfg.action_set[i] for i in tie_break_order(cfg.action_set)])
    wg, wo, eps = cfg.kernel_weights()

    return {
        "field_batch (20k points)": lambda k: k.field_batch(vals, ox, oy, res, xs, ys),
        "stencil_derivs (x1000)": lambda k: [k.stencil_derivs(vals, ox, oy, res, x, y)
                                             for x, y in zip(xs[:1000], ys[:1000])],
        "dp_plan (p=5, 5 actions)": lambda k: k.dp_plan(vals, ox, oy, res, -1.8, 1.2, -0.59, 0.2, 1.0,
                                                        omegas, 5, 1.8, -1.2, wg, wo, eps, False),
        "systematic_indices (N=1000)": lambda k: k.systematic_indices(w, 0.37),
    }


def _same(a, b):
    if isinstance(a, tuple) and len(a) == 2 and isinstance(a[1], np.ndarray):
        return a[0] == b[0] and np.array_equal(a[1], b[1])
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if "compiled" not in _backend.available_backends():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    cases = _cases(lab_map(), np.random.default_rng(0))
    print(f"{'kernel':30s} {'compiled':>12s} {'python':>12s} {'speed-up':>9s}  same")
    for name, fn in cases.items():
        times, outs = {}, {}
        for backend in ("compiled", "python"):
            _backend.use_backend(backend)
            k = _backend.get_kernels()
            outs[backend] = fn(k)
            number = 1 if backend == "python" else 10
            times[backend] = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
        same = _same(outs["compiled"], outs["python"])
        print(f"{name:30s} {times['compiled'] * 1e3:10.3f}ms {times['python'] * 1e3:10.3f}ms "
              f"{times['python'] / times['compiled']:8.1f}x  {'yes' if same else 'NO'}")
    _backend.use_backend("compiled")


if __name__ == "__main__":
    main()

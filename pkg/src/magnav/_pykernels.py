"""Pure-Python implementations of the numerical hot loops.

This module is the fallback used when the compiled ``_kernels`` extension is
unavailable, and the reference the extension is tested against. Every
arithmetic expression here is mirrored term-for-term in ``_kernels.pyx``;
both backends must return bit-identical doubles, so do not reorder
operations in one without the other.

Out-of-bounds map lookups return NaN instead of raising; the public wrappers
in :mod:`magnav.fieldmap` turn NaN into :class:`~magnav.errors.OutOfBounds`.
"""
import math

import numpy as np

TWO_PI = 2.0 * math.pi
SNAP_TOL = 1e-9  # grid-index units; queries this close to a node snap onto it


def wrap_angle(a):
    r = math.remainder(a, TWO_PI)
    if r == -math.pi:
        return math.pi
    return r


def _grid_coord(q, origin, res, n):
    f = (q - origin) / res
    r = math.floor(f + 0.5)
    if abs(f - r) <= SNAP_TOL:
        f = r
    if not (f >= 0.0 and f <= n - 1):
        return -1, 0.0
    i = int(math.floor(f))
    if i == n - 1:
        i = n - 2
    return i, f - i


def field_scalar(values, ox, oy, res, x, y):
    nx, ny = values.shape
    i, t = _grid_coord(x, ox, res, nx)
    if i < 0:
        return math.nan
    j, s = _grid_coord(y, oy, res, ny)
    if j < 0:
        return math.nan
    v00 = values[i, j]
    v10 = values[i + 1, j]
    v01 = values[i, j + 1]
    v11 = values[i + 1, j + 1]
    return ((1.0 - t) * (1.0 - s) * v00 + t * (1.0 - s) * v10
            + (1.0 - t) * s * v01 + t * s * v11)


def field_batch(values, ox, oy, res, xs, ys):
    values = np.asarray(values, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    nx, ny = values.shape
    out = np.full(xs.shape, np.nan)

    def coords(q, origin, n):
        f = (q - origin) / res
        r = np.floor(f + 0.5)
        f = np.where(np.abs(f - r) <= SNAP_TOL, r, f)
        ok = (f >= 0.0) & (f <= n - 1)
        i = np.floor(np.where(ok, f, 0.0)).astype(np.intp)
        i = np.where(i == n - 1, n - 2, i)
        return i, f - i, ok

    i, t, okx = coords(xs, ox, nx)
    j, s, oky = coords(ys, oy, ny)
    ok = okx & oky
    i, t, j, s = i[ok], t[ok], j[ok], s[ok]
    v00 = values[i, j]
    v10 = values[i + 1, j]
    v01 = values[i, j + 1]
    v11 = values[i + 1, j + 1]
    out[ok] = ((1.0 - t) * (1.0 - s) * v00 + t * (1.0 - s) * v10
               + (1.0 - t) * s * v01 + t * s * v11)
    return out


def stencil_derivs(values, ox, oy, res, x, y):
    """Value, gradient and Hessian entries by central differences.

    Returns ``(h, gx, gy, hxx, hxy, hyy)``; all NaN when any of the nine
    stencil points is off the map.
    """
    d = res
    hc = field_scalar(values, ox, oy, res, x, y)
    hxp = field_scalar(values, ox, oy, res, x + d, y)
    hxm = field_scalar(values, ox, oy, res, x - d, y)
    hyp = field_scalar(values, ox, oy, res, x, y + d)
    hym = field_scalar(values, ox, oy, res, x, y - d)
    hpp = field_scalar(values, ox, oy, res, x + d, y + d)
    hpm = field_scalar(values, ox, oy, res, x + d, y - d)
    hmp = field_scalar(values, ox, oy, res, x - d, y + d)
    hmm = field_scalar(values, ox, oy, res, x - d, y - d)
    if math.isnan(hc + hxp + hxm + hyp + hym + hpp + hpm + hmp + hmm):
        nan = math.nan
        return nan, nan, nan, nan, nan, nan
    gx = (hxp - hxm) / (2.0 * d)
    gy = (hyp - hym) / (2.0 * d)
    hxx = (hxp - 2.0 * hc + hxm) / (d * d)
    hyy = (hyp - 2.0 * hc + hym) / (d * d)
    hxy = (hpp - hpm - hmp + hmm) / (4.0 * d * d)
    return hc, gx, gy, hxx, hxy, hyy


def gramian_det_2x2(a, b, c, d):
    det = a * d - b * c
    return det * det


def obs_step_cost(values, ox, oy, res, x, y, theta, v,
                  goal_x, goal_y, w_goal, w_obs, eps_det):
    h, gx, gy, hxx, hxy, hyy = stencil_derivs(values, ox, oy, res, x, y)
    if math.isnan(h):
        return math.inf
    fx = v * math.cos(theta)
    fy = v * math.sin(theta)
    r2x = hxx * fx + hxy * fy
    r2y = hxy * fx + hyy * fy
    det = gramian_det_2x2(gx, gy, r2x, r2y)
    dxg = x - goal_x
    dyg = y - goal_y
    cost = w_goal * (dxg * dxg + dyg * dyg)
    return cost + w_obs * (1.0 / max(det, eps_det))


def dp_plan(values, ox, oy, res, x, y, theta, v, dt, omegas, horizon,
            goal_x, goal_y, w_goal, w_obs, eps_det, include_terminal):
    """Backward recursion over the action tree.

    ``omegas`` must already be in tie-break order. Returns the optimal total
    cost and the chosen positions into ``omegas`` (length ``horizon``).
    Costs are accumulated from the horizon end backward:
    ``c1 + (c2 + (... + (cp + 0.0)))``.
    """
    n_act = len(omegas)

    def best(depth, px, py, pth):
        nxt_x = px + v * math.cos(pth) * dt
        nxt_y = py + v * math.sin(pth) * dt
        counted = depth < horizon - 1 or include_terminal
        best_total = math.inf
        best_seq = None
        for k in range(n_act):
            th = wrap_angle(pth + omegas[k] * dt)
            c = obs_step_cost(values, ox, oy, res, nxt_x, nxt_y, th, v,
                              goal_x, goal_y, w_goal, w_obs, eps_det)
            if not counted and c != math.inf:
                c = 0.0
            if depth == horizon - 1:
                rest, rest_seq = 0.0, []
            else:
                rest, rest_seq = best(depth + 1, nxt_x, nxt_y, th)
            total = c + rest
            if total < best_total or best_seq is None:
                best_total = total
                best_seq = [k] + rest_seq
        return best_total, best_seq

    total, seq = best(0, x, y, theta)
    return total, np.asarray(seq, dtype=np.intp)


def systematic_indices(weights, u0):
    n = len(weights)
    cumsum = np.cumsum(weights)
    cumsum[-1] = 1.0
    positions = (u0 + np.arange(n)) / n
    idx = np.empty(n, dtype=np.intp)
    j = 0
    for i in range(n):
        while positions[i] >= cumsum[j]:
            j += 1
        idx[i] = j
    return idx

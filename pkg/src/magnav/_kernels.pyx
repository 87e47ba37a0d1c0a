# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Arithmetic mirrors ``_pykernels`` term-for-term.

Build without -ffast-math and with -ffp-contract=off: the planner's oracle
test compares costs from both backends for exact equality.
"""
import numpy as np

from libc.math cimport cos, sin, floor, fabs, remainder, isnan, INFINITY, NAN, M_PI

cdef double TWO_PI = 2.0 * M_PI
cdef double SNAP_TOL = 1e-9


cdef inline double _wrap(double a) noexcept nogil:
    cdef double r = remainder(a, TWO_PI)
    if r == -M_PI:
        return M_PI
    return r


def wrap_angle(double a):
    return _wrap(a)


cdef inline int _grid_coord(double q, double origin, double res, Py_ssize_t n,
                            double* frac) noexcept nogil:
    cdef double f = (q - origin) / res
    cdef double r = floor(f + 0.5)
    cdef int i
    if fabs(f - r) <= SNAP_TOL:
        f = r
    if not (f >= 0.0 and f <= n - 1):
        return -1
    i = <int>floor(f)
    if i == n - 1:
        i = <int>(n - 2)
    frac[0] = f - i
    return i


cdef inline double _field(const double[:, ::1] values, double ox, double oy,
                          double res, double x, double y) noexcept nogil:
    cdef double t, s
    cdef int i, j
    i = _grid_coord(x, ox, res, values.shape[0], &t)
    if i < 0:
        return NAN
    j = _grid_coord(y, oy, res, values.shape[1], &s)
    if j < 0:
        return NAN
    return ((1.0 - t) * (1.0 - s) * values[i, j] + t * (1.0 - s) * values[i + 1, j]
            + (1.0 - t) * s * values[i, j + 1] + t * s * values[i + 1, j + 1])


def field_scalar(const double[:, ::1] values, double ox, double oy, double res,
                 double x, double y):
    return _field(values, ox, oy, res, x, y)


def field_batch(values, double ox, double oy, double res, xs, ys):
    cdef const double[:, ::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    xs_a = np.ascontiguousarray(xs, dtype=np.float64)
    ys_a = np.ascontiguousarray(ys, dtype=np.float64)
    out = np.empty(xs_a.shape, dtype=np.float64)
    cdef const double[::1] xv = xs_a.reshape(-1)
    cdef const double[::1] yv = ys_a.reshape(-1)
    cdef double[::1] ov = out.reshape(-1)
    cdef Py_ssize_t k
    with nogil:
        for k in range(xv.shape[0]):
            ov[k] = _field(vals, ox, oy, res, xv[k], yv[k])
    return out


cdef inline bint _derivs(const double[:, ::1] values, double ox, double oy, double res,
                         double x, double y, double* out) noexcept nogil:
    cdef double d = res
    cdef double hc = _field(values, ox, oy, res, x, y)
    cdef double hxp = _field(values, ox, oy, res, x + d, y)
    cdef double hxm = _field(values, ox, oy, res, x - d, y)
    cdef double hyp = _field(values, ox, oy, res, x, y + d)
    cdef double hym = _field(values, ox, oy, res, x, y - d)
    cdef double hpp = _field(values, ox, oy, res, x + d, y + d)
    cdef double hpm = _field(values, ox, oy, res, x + d, y - d)
    cdef double hmp = _field(values, ox, oy, res, x - d, y + d)
    cdef double hmm = _field(values, ox, oy, res, x - d, y - d)
    if isnan(hc + hxp + hxm + hyp + hym + hpp + hpm + hmp + hmm):
        return False
    out[0] = hc
    out[1] = (hxp - hxm) / (2.0 * d)
    out[2] = (hyp - hym) / (2.0 * d)
    out[3] = (hxp - 2.0 * hc + hxm) / (d * d)
    out[4] = (hpp - hpm - hmp + hmm) / (4.0 * d * d)
    out[5] = (hyp - 2.0 * hc + hym) / (d * d)
    return True


def stencil_derivs(const double[:, ::1] values, double ox, double oy, double res,
                   double x, double y):
    cdef double out[6]
    if not _derivs(values, ox, oy, res, x, y, out):
        return NAN, NAN, NAN, NAN, NAN, NAN
    # (h, gx, gy, hxx, hxy, hyy)
    return out[0], out[1], out[2], out[3], out[4], out[5]


def gramian_det_2x2(double a, double b, double c, double d):
    cdef double det = a * d - b * c
    return det * det


cdef inline double _cost(const double[:, ::1] values, double ox, double oy, double res,
                         double x, double y, double theta, double v,
                         double goal_x, double goal_y, double w_goal, double w_obs,
                         double eps_det) noexcept nogil:
    cdef double dv[6]
    cdef double fx, fy, r2x, r2y, det, dxg, dyg, cost
    if not _derivs(values, ox, oy, res, x, y, dv):
        return INFINITY
    fx = v * cos(theta)
    fy = v * sin(theta)
    r2x = dv[3] * fx + dv[4] * fy
    r2y = dv[4] * fx + dv[5] * fy
    det = dv[1] * r2y - dv[2] * r2x
    det = det * det
    dxg = x - goal_x
    dyg = y - goal_y
    cost = w_goal * (dxg * dxg + dyg * dyg)
    if det < eps_det:
        det = eps_det
    return cost + w_obs * (1.0 / det)


def obs_step_cost(const double[:, ::1] values, double ox, double oy, double res,
                  double x, double y, double theta, double v,
                  double goal_x, double goal_y, double w_goal, double w_obs,
                  double eps_det):
    return _cost(values, ox, oy, res, x, y, theta, v, goal_x, goal_y,
                 w_goal, w_obs, eps_det)


cdef struct PlanCtx:
    double ox, oy, res, v, dt, goal_x, goal_y, w_goal, w_obs, eps_det
    int horizon, n_act
    bint include_terminal


cdef double _best(const double[:, ::1] values, const double[::1] omegas, PlanCtx* c,
                  int depth, double px, double py, double pth,
                  int[:, ::1] seqbuf) noexcept nogil:
    # seqbuf[depth, depth:] receives the best suffix found from this node
    cdef double nx_ = px + c.v * cos(pth) * c.dt
    cdef double ny_ = py + c.v * sin(pth) * c.dt
    cdef bint counted = depth < c.horizon - 1 or c.include_terminal
    cdef double best_total = INFINITY
    cdef bint have = False
    cdef double th, cost, rest, total
    cdef int k, m
    for k in range(c.n_act):
        th = _wrap(pth + omegas[k] * c.dt)
        cost = _cost(values, c.ox, c.oy, c.res, nx_, ny_, th, c.v, c.goal_x, c.goal_y,
                     c.w_goal, c.w_obs, c.eps_det)
        if not counted and cost != INFINITY:
            cost = 0.0
        if depth == c.horizon - 1:
            rest = 0.0
        else:
            rest = _best(values, omegas, c, depth + 1, nx_, ny_, th, seqbuf)
        total = cost + rest
        if total < best_total or not have:
            best_total = total
            have = True
            seqbuf[depth, depth] = k
            for m in range(depth + 1, c.horizon):
                seqbuf[depth, m] = seqbuf[depth + 1, m]
    return best_total


def dp_plan(values, double ox, double oy, double res, double x, double y, double theta,
            double v, double dt, omegas, int horizon, double goal_x, double goal_y,
            double w_goal, double w_obs, double eps_det, bint include_terminal):
    cdef const double[:, ::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] om = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef PlanCtx ctx
    ctx.ox = ox; ctx.oy = oy; ctx.res = res; ctx.v = v; ctx.dt = dt
    ctx.goal_x = goal_x; ctx.goal_y = goal_y
    ctx.w_goal = w_goal; ctx.w_obs = w_obs; ctx.eps_det = eps_det
    ctx.horizon = horizon; ctx.n_act = <int>om.shape[0]
    ctx.include_terminal = include_terminal
    buf = np.zeros((horizon + 1, horizon + 1), dtype=np.intc)
    cdef int[:, ::1] seqbuf = buf
    cdef double total
    with nogil:
        total = _best(vals, om, &ctx, 0, x, y, theta, seqbuf)
    return total, buf[0, :horizon].astype(np.intp)


def systematic_indices(weights, double u0):
    w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    cumsum_a = np.cumsum(w)
    cumsum_a[n - 1] = 1.0
    cdef const double[::1] cumsum = cumsum_a
    idx_a = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = idx_a
    cdef Py_ssize_t i, j = 0
    cdef double pos
    with nogil:
        for i in range(n):
            pos = (u0 + i) / n
            while pos >= cumsum[j]:
                j += 1
            idx[i] = j
    return idx_a

"""Histogram Bayes filter over (x, y) and one-step expected-entropy-reduction guidance.

The belief is a probability mass on a regular grid of cell centers; heading
is carried as a single deterministic value advanced by the commanded turn
rate (heading uncertainty is folded into the motion kernel). A control is
executed rotate-then-translate, see :func:`predict`.

Motion moves mass by whole cells and keeps the sub-cell remainder as a grid
offset, so translation itself never spreads the belief. Splitting mass
bilinearly between neighbours would blur diagonal moves more than
axis-aligned ones, and that artificial blur would leak into the entropy
terms the planner compares.

``eer`` is defined as *current entropy minus expected next entropy*, so a
positive value means the action is expected to sharpen the belief, and the
action cost ``w_obs * 0.5**eer + w_goal * dist`` rewards it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d
from scipy.special import ndtr

from .errors import DegenerateBelief, InvalidArgument
from .fieldmap import GridMap, field_many
from .obs_planner import PlannerWeights, tie_break_order
from .vehicle import ControlInput, NoiseConfig, Pose, wrap_angle

DEFAULT_EER_RATES = tuple(math.radians(a) for a in (-40.0, -20.0, 0.0, 20.0, 40.0))
SHIFT_SNAP = 1e-9  # cell units
THREE_TAP_MAX_SIGMA = 0.5  # cells
COST_TIE_RTOL = 1e-12
QUAD_TAIL = 1e-9
EDGE_LOSS_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class BeliefGrid:
    """Probability mass over cell centers
    ``(origin_x + i*res + offset_x, origin_y + j*res + offset_y)``.

    ``origin`` stays on the lattice the grid was built on; ``offset`` is the
    sub-cell displacement accumulated by motion, at most half a cell per axis.
    """

    origin_x: float
    origin_y: float
    resolution: float
    mass: np.ndarray = field(repr=False)
    heading: float = 0.0
    offset_x: float = 0.0
    offset_y: float = 0.0

    def __post_init__(self):
        mass = np.array(self.mass, dtype=np.float64)
        if mass.ndim != 2 or mass.size == 0:
            raise InvalidArgument("mass must be a non-empty 2-D array")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise InvalidArgument("mass must be finite and non-negative")
        total = mass.sum()
        if not total > 0:
            raise DegenerateBelief("belief has no mass")
        if abs(total - 1.0) > 1e-9:
            mass = mass / total
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def nx(self) -> int:
        return self.mass.shape[0]

    @property
    def ny(self) -> int:
        return self.mass.shape[1]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, Y)`` arrays of cell-center coordinates, shape ``(nx, ny)``."""
        xs = self.origin_x + np.arange(self.nx) * self.resolution + self.offset_x
        ys = self.origin_y + np.arange(self.ny) * self.resolution + self.offset_y
        return np.meshgrid(xs, ys, indexing="ij")

    def with_mass(self, mass, heading=None, offset=None) -> "BeliefGrid":
        ox, oy = (self.offset_x, self.offset_y) if offset is None else offset
        return BeliefGrid(self.origin_x, self.origin_y, self.resolution, mass,
                          self.heading if heading is None else heading, ox, oy)

    def mean(self) -> tuple[float, float]:
        X, Y = self.centers()
        return float(np.sum(X * self.mass)), float(np.sum(Y * self.mass))

    def trace_position(self) -> float:
        X, Y = self.centers()
        mx, my = self.mean()
        return float(np.sum(((X - mx) ** 2 + (Y - my) ** 2) * self.mass))

    def argmax_center(self) -> tuple[float, float]:
        """Most probable cell center; ties go to the lowest row-major index."""
        i, j = np.unravel_index(int(np.argmax(self.mass)), self.mass.shape)
        return (self.origin_x + i * self.resolution + self.offset_x,
                self.origin_y + j * self.resolution + self.offset_y)


def grid_for_map(m: GridMap, resolution: float = 0.25) -> tuple[float, float, int, int]:
    """Cell layout ``(origin_x, origin_y, nx, ny)`` whose centers all lie on ``m``."""
    x0, x1, y0, y1 = m.bounds
    nx = int(math.floor((x1 - x0) / resolution + 1e-9)) + 1
    ny = int(math.floor((y1 - y0) / resolution + 1e-9)) + 1
    return x0, y0, nx, ny


def uniform_belief(origin_x, origin_y, resolution, nx, ny, heading=0.0) -> BeliefGrid:
    return BeliefGrid(origin_x, origin_y, resolution, np.full((nx, ny), 1.0 / (nx * ny)), heading)


def gaussian_belief(origin_x, origin_y, resolution, nx, ny, mean: Pose, std_xy) -> BeliefGrid:
    """Independent Gaussian in x and y integrated over each cell."""
    def axis_mass(origin, n, mu, sd):
        c = origin + np.arange(n) * resolution
        if sd == 0:
            out = np.zeros(n)
            out[int(np.argmin(np.abs(c - mu)))] = 1.0
            return out
        return ndtr((c + resolution / 2 - mu) / sd) - ndtr((c - resolution / 2 - mu) / sd)

    mx = axis_mass(origin_x, nx, mean.x, std_xy[0])
    my = axis_mass(origin_y, ny, mean.y, std_xy[1])
    return BeliefGrid(origin_x, origin_y, resolution, np.outer(mx, my), mean.theta)


@dataclass(frozen=True)
class EerPlannerConfig:
    """One-step EER planner settings. ``action_set`` holds turn rates in rad/s."""

    goal: tuple[float, float]
    action_set: tuple[float, ...] = DEFAULT_EER_RATES
    v: float = 0.2
    dt: float = 1.0
    weights: PlannerWeights = field(default_factory=PlannerWeights)
    sigma_z: float = 100.0
    motion_kernel_sigma: float = 0.04
    n_z_quadrature: int = 21

    def __post_init__(self):
        object.__setattr__(self, "action_set", tuple(float(a) for a in self.action_set))
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))
        if not self.action_set:
            raise InvalidArgument("action_set must not be empty")
        if self.n_z_quadrature < 3:
            raise InvalidArgument("n_z_quadrature must be >= 3")
        if not (self.sigma_z > 0 and self.dt > 0 and self.v >= 0 and self.motion_kernel_sigma >= 0):
            raise InvalidArgument("sigma_z, dt must be > 0; v, motion_kernel_sigma >= 0")

    @staticmethod
    def kernel_sigma_for(noise: NoiseConfig, v: float, dt: float) -> float:
        """Per-step position sigma implied by the process-noise model."""
        return noise.motion_sigmas(ControlInput(v, 0.0), dt)[0]


def entropy(b: BeliefGrid) -> float:
    """Shannon entropy in nats (``0 ln 0 := 0``)."""
    p = b.mass[b.mass > 0]
    return float(-np.sum(p * np.log(p)))


def _cell_fields(b: BeliefGrid, m: GridMap) -> np.ndarray:
    X, Y = b.centers()
    return field_many(m, X, Y) + m.heading_offset(b.heading)


def _posterior_mass(mass, h, z, sigma_z):
    # log-space; cells without prior mass or off the map stay at zero
    r = z - h
    ll = -(r * r) / (2.0 * sigma_z * sigma_z)
    ok = (mass > 0) & np.isfinite(ll)
    if not ok.any():
        raise DegenerateBelief("no cell with prior mass lies on the map")
    logp = np.full(mass.shape, -np.inf)
    logp[ok] = np.log(mass[ok]) + ll[ok]
    post = np.exp(logp - logp[ok].max())
    return post / post.sum()


def measurement_update(b: BeliefGrid, z: float, m: GridMap, sigma_z: float) -> BeliefGrid:
    if not sigma_z > 0:
        raise InvalidArgument(f"sigma_z must be > 0, got {sigma_z}")
    return b.with_mass(_posterior_mass(b.mass, _cell_fields(b, m), z, sigma_z))


def _shift(a, di, dj):
    """Translate ``a`` by whole cells, dropping what falls off the edge."""
    out = np.zeros_like(a)
    nx, ny = a.shape
    if abs(di) >= nx or abs(dj) >= ny:
        return out
    src_i = slice(max(0, -di), nx - max(0, di))
    dst_i = slice(max(0, di), nx - max(0, -di))
    src_j = slice(max(0, -dj), ny - max(0, dj))
    dst_j = slice(max(0, dj), ny - max(0, -dj))
    out[dst_i, dst_j] = a[src_i, src_j]
    return out


def _advance(offset_cells, d):
    """Whole-cell shift and new sub-cell offset after moving ``d`` cells."""
    total = offset_cells + d
    k = math.floor(total + 0.5)
    rem = total - k
    if abs(rem) <= SHIFT_SNAP:
        rem = 0.0
    return int(k), rem


def gaussian_kernel(sigma_cells: float) -> np.ndarray:
    """Normalized 1-D blur kernel with variance ``sigma_cells**2``.

    Below half a cell a sampled Gaussian would lose almost all of its
    variance, so the three-tap ``[p/2, 1-p, p/2]`` with ``p = sigma**2`` is
    used instead. Wider kernels are sampled Gaussians truncated at 3 sigma.
    """
    if not sigma_cells > 0:
        return np.ones(1)
    if sigma_cells < THREE_TAP_MAX_SIGMA:
        p = sigma_cells * sigma_cells
        return np.array([0.5 * p, 1.0 - p, 0.5 * p])
    radius = int(math.floor(3.0 * sigma_cells))
    k = np.arange(-radius, radius + 1)
    w = np.exp(-(k * k) / (2.0 * sigma_cells * sigma_cells))
    return w / w.sum()


def _predict_mass(b: BeliefGrid, u: ControlInput, dt: float, kernel_sigma: float):
    heading = wrap_angle(b.heading + u.omega * dt)
    res = b.resolution
    ki, rx = _advance(b.offset_x / res, u.v * dt * math.cos(heading) / res)
    kj, ry = _advance(b.offset_y / res, u.v * dt * math.sin(heading) / res)
    out = _shift(b.mass, ki, kj) if (ki or kj) else b.mass.copy()
    kern = gaussian_kernel(kernel_sigma / res)
    if kern.size > 1:
        out = convolve1d(out, kern, axis=0, mode="constant")
        out = convolve1d(out, kern, axis=1, mode="constant")
    return out, heading, (rx * res, ry * res)


def predict(b: BeliefGrid, u: ControlInput, dt: float, kernel_sigma: float) -> BeliefGrid:
    """Motion prediction: rotate by ``omega * dt``, then translate ``v * dt``
    along the new heading (whole cells plus a carried offset), then blur with
    an isotropic kernel of standard deviation ``kernel_sigma``. Mass leaving
    the grid is discarded and the remainder renormalized.

    Turning before translating is what lets a one-step lookahead tell turn
    rates apart; with the translate-then-turn order every candidate action
    would predict the same next position.

    Raises:
        DegenerateBelief: the whole support moved off the grid.
    """
    out, heading, offset = _predict_mass(b, u, dt, kernel_sigma)
    total = out.sum()
    if not total > 0:
        raise DegenerateBelief("prediction moved all belief mass off the grid")
    return b.with_mass(out / total, heading, offset)


def edge_loss(b: BeliefGrid, u: ControlInput, dt: float, kernel_sigma: float,
              m: GridMap | None = None) -> float:
    """Fraction of belief mass that :func:`predict` would push off the grid.

    With ``m``, mass landing on cells within one map resolution of the map
    border counts as lost too, the same margin the derivative stencil needs.
    """
    out, heading, offset = _predict_mass(b, u, dt, kernel_sigma)
    if m is None:
        return max(0.0, 1.0 - float(out.sum()))
    X, Y = b.with_mass(b.mass, heading, offset).centers()
    x0, x1, y0, y1 = m.bounds
    r = m.resolution
    inner = (X >= x0 + r) & (X <= x1 - r) & (Y >= y0 + r) & (Y <= y1 - r)
    return max(0.0, 1.0 - float(out[inner].sum()))


def _quadrature(mass, h, sigma_z, n_z):
    sel = (mass > 0) & np.isfinite(h)
    hs = h[sel]
    ws = mass[sel]
    # cells jointly holding <= QUAD_TAIL of the mass do not stretch the range
    order = np.argsort(ws, kind="stable")
    span = np.ones(hs.size, dtype=bool)
    span[order[np.cumsum(ws[order]) <= QUAD_TAIL]] = False
    lo = hs[span].min() - 3.0 * sigma_z
    hi = hs[span].max() + 3.0 * sigma_z
    edges = np.linspace(lo, hi, n_z + 1)
    cdf = ndtr((edges[None, :] - hs[:, None]) / sigma_z)
    probs = ws @ (cdf[:, 1:] - cdf[:, :-1])
    return 0.5 * (edges[1:] + edges[:-1]), probs / probs.sum()


def predictive_measurement_quadrature(b: BeliefGrid, m: GridMap, sigma_z: float,
                                      n_z: int) -> list[tuple[float, float]]:
    """Bin the predictive marginal ``p(z) = sum_c b(c) N(z; h(c), sigma_z^2)``.

    ``n_z`` equal-width bins span the range of ``h`` over the belief support,
    widened by three sigma each side; masses are renormalized to sum to one.
    Cells that together hold at most ``QUAD_TAIL`` of the mass still
    contribute to the bin masses but do not widen the range, otherwise a
    1e-30 tail across the map would stretch every bin far beyond sigma_z.
    """
    z, p = _quadrature(b.mass, _cell_fields(b, m), sigma_z, n_z)
    return list(zip(z.tolist(), p.tolist()))


def expected_posterior_entropy(b: BeliefGrid, m: GridMap, sigma_z: float, n_z: int) -> float:
    """``E_z[H(b | z)]`` under the binned predictive measurement distribution."""
    h = _cell_fields(b, m)
    zs, ps = _quadrature(b.mass, h, sigma_z, n_z)
    total = 0.0
    for z, p in zip(zs, ps):
        post = _posterior_mass(b.mass, h, z, sigma_z)
        q = post[post > 0]
        total += p * float(-np.sum(q * np.log(q)))
    return total


def eer(b_post: BeliefGrid, u: ControlInput, cfg: EerPlannerConfig, m: GridMap) -> float:
    """Expected entropy reduction of applying ``u`` then measuring."""
    pred = predict(b_post, u, cfg.dt, cfg.motion_kernel_sigma)
    return entropy(b_post) - expected_posterior_entropy(pred, m, cfg.sigma_z, cfg.n_z_quadrature)


def dist_to_goal(b: BeliefGrid, u: ControlInput, cfg: EerPlannerConfig) -> float:
    """Distance from the most probable predicted cell to the goal."""
    x, y = predict(b, u, cfg.dt, cfg.motion_kernel_sigma).argmax_center()
    return math.hypot(x - cfg.goal[0], y - cfg.goal[1])


@dataclass(frozen=True)
class ActionScore:
    omega: float
    eer: float
    dist: float
    cost: float
    lost: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.lost <= EDGE_LOSS_TOL and self.cost < math.inf


def score_actions(b: BeliefGrid, cfg: EerPlannerConfig, m: GridMap) -> list[ActionScore]:
    """Cost of every action in ``cfg.action_set`` order.

    ``lost`` is the mass the prediction pushes off the grid or into the
    border ring, see :func:`edge_loss`. Renormalizing mass lost off the grid
    sharpens the predicted belief, which would otherwise make driving off
    the map look informative.
    """
    w = cfg.weights
    scores = []
    for omega in cfg.action_set:
        u = ControlInput(cfg.v, omega)
        lost = edge_loss(b, u, cfg.dt, cfg.motion_kernel_sigma, m)
        try:
            d = dist_to_goal(b, u, cfg)
            e = eer(b, u, cfg, m) if w.w_obs != 0 else 0.0
        except DegenerateBelief:
            scores.append(ActionScore(omega, math.nan, math.inf, math.inf, 1.0))
            continue
        scores.append(ActionScore(omega, e, d, w.w_obs * 0.5 ** e + w.w_goal * d, lost))
    return scores


def _clearly_less(a, b):
    return a < b - COST_TIE_RTOL * max(1.0, abs(b))


def choose_action(b: BeliefGrid, cfg: EerPlannerConfig, m: GridMap) -> ControlInput:
    """Minimum-cost action among those losing at most ``EDGE_LOSS_TOL`` of the
    mass (see :func:`edge_loss`); ties go to the smallest turn rate, then lower index.
    Costs within ``COST_TIE_RTOL`` (relative) of each other count as tied,
    so rounding in the entropy sums cannot override the tie-break.
    When no action qualifies, the one losing the least mass is taken.

    Raises:
        DegenerateBelief: every action pushes the whole belief off the grid.
    """
    scores = score_actions(b, cfg, m)
    order = tie_break_order(cfg.action_set)
    best = None
    for i in order:
        if scores[i].feasible and (best is None or _clearly_less(scores[i].cost, scores[best].cost)):
            best = i
    if best is None:
        for i in order:
            if best is None or scores[i].lost < scores[best].lost:
                best = i
        if scores[best].lost >= 1.0:
            raise DegenerateBelief("every action pushes the belief off the grid")
    return ControlInput(cfg.v, cfg.action_set[best])

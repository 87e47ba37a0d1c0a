"""Receding-horizon DP planner trading distance-to-goal against observability.

The planner searches heading-change sequences of length ``horizon`` over a
finite action set, with constant forward speed, using noise-free unicycle
rollouts from the current estimate. Each successor state ``s`` costs

    w_goal * |s - goal|^2 + w_obs / max(det(O^T O)(s) / det_ref, eps_det)

``det_ref`` (default 1) makes the determinant dimensionless; in raw nT a
typical determinant is around 1e11 and the observability term would vanish
next to the goal term.

Only the first ``horizon - 1`` successor states are charged by default
(``include_terminal=True`` charges all of them). Sequences that take any
state, or its finite-difference stencil, off the map cost ``inf``.

Ties are broken toward actions closest to zero turn, then lower index,
applied lexicographically along the sequence, so :func:`plan` and
:func:`brute_force_plan` agree exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from . import _backend
from .errors import InvalidArgument, NoFeasiblePlan
from .fieldmap import GridMap
from .observability import EPS_DET
from .vehicle import ControlInput, Pose, step_deterministic

DEFAULT_OBS_ACTIONS = tuple(math.radians(a) for a in (-45.0, -22.0, 0.0, 22.0, 45.0))
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class PlannerWeights:
    w_goal: float = 1.0
    w_obs: float = 1.5

    def __post_init__(self):
        if not (self.w_goal >= 0 and self.w_obs >= 0):
            raise InvalidArgument("planner weights must be >= 0")


@dataclass(frozen=True)
class ObsPlannerConfig:
    """Planner settings.

    ``action_set`` holds heading changes per planning step in radians (the
    commanded rate is ``action / dt``).
    """

    goal: tuple[float, float]
    horizon: int = 5
    action_set: tuple[float, ...] = DEFAULT_OBS_ACTIONS
    v: float = 0.2
    dt: float = 1.0
    weights: PlannerWeights = field(default_factory=PlannerWeights)
    eps_det: float = EPS_DET
    include_terminal: bool = False
    det_ref: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "action_set", tuple(float(a) for a in self.action_set))
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))
        if self.horizon < 1:
            raise InvalidArgument(f"horizon must be >= 1, got {self.horizon}")
        if not self.action_set:
            raise InvalidArgument("action_set must not be empty")
        if not (self.v > 0 and self.dt > 0):
            raise InvalidArgument("v and dt must be > 0")
        if not self.eps_det > 0:
            raise InvalidArgument("eps_det must be > 0")
        if not (self.det_ref > 0 and math.isfinite(self.det_ref)):
            raise InvalidArgument("det_ref must be finite and > 0")

    def kernel_weights(self) -> tuple[float, float, float]:
        """``(w_goal, w_obs, eps)`` with ``det_ref`` folded into the last two."""
        w = self.weights
        return w.w_goal, w.w_obs * self.det_ref, self.eps_det * self.det_ref

    def control(self, action: float) -> ControlInput:
        return ControlInput(self.v, action / self.dt)


@dataclass(frozen=True)
class PlannedPath:
    controls: list[float]
    states: list[Pose]
    total_cost: float


def tie_break_order(actions) -> list[int]:
    """Indices of ``actions`` sorted by (|action|, index)."""
    return sorted(range(len(actions)), key=lambda i: (abs(actions[i]), i))


def step_cost(m: GridMap, pose: Pose, u: ControlInput, cfg: ObsPlannerConfig) -> float:
    """Cost charged at ``pose``; ``inf`` when the derivative stencil leaves the map."""
    w_goal, w_obs, eps = cfg.kernel_weights()
    return _backend.kernels.obs_step_cost(
        m.values, m.origin_x, m.origin_y, m.resolution, float(pose.x), float(pose.y),
        float(pose.theta), float(u.v), cfg.goal[0], cfg.goal[1], w_goal, w_obs, eps)


def rollout(est: Pose, controls, cfg: ObsPlannerConfig) -> list[Pose]:
    states = []
    pose = est
    for a in controls:
        pose = step_deterministic(pose, cfg.control(a), cfg.dt)
        states.append(pose)
    return states


def _check_start(m, est):
    if not m.contains(est.x, est.y):
        raise InvalidArgument(f"estimate ({est.x}, {est.y}) is outside map bounds {m.bounds}")


def plan(m: GridMap, est: Pose, cfg: ObsPlannerConfig) -> tuple[float, PlannedPath]:
    """Optimal first heading change and the full planned sequence.

    Raises:
        InvalidArgument: ``est`` is off the map.
        NoFeasiblePlan: every sequence leaves the map.
    """
    _check_start(m, est)
    order = tie_break_order(cfg.action_set)
    omegas = [cfg.action_set[i] / cfg.dt for i in order]
    w_goal, w_obs, eps = cfg.kernel_weights()
    total, picks = _backend.kernels.dp_plan(
        m.values, m.origin_x, m.origin_y, m.resolution, float(est.x), float(est.y),
        float(est.theta), cfg.v, cfg.dt, omegas, cfg.horizon, cfg.goal[0], cfg.goal[1],
        w_goal, w_obs, eps, bool(cfg.include_terminal))
    if total == math.inf:
        raise NoFeasiblePlan(f"every {cfg.horizon}-step sequence from {est} leaves the map")
    controls = [cfg.action_set[order[int(k)]] for k in picks]
    return controls[0], PlannedPath(controls, rollout(est, controls, cfg), total)


def brute_force_plan(m: GridMap, est: Pose, cfg: ObsPlannerConfig) -> tuple[float, PlannedPath]:
    """Exhaustive enumeration of all action sequences (test oracle for :func:`plan`)."""
    _check_start(m, est)
    n_seq = len(cfg.action_set) ** cfg.horizon
    if n_seq > BRUTE_FORCE_LIMIT:
        raise InvalidArgument(f"{n_seq} sequences exceed the brute-force limit {BRUTE_FORCE_LIMIT}")
    order = tie_break_order(cfg.action_set)
    p = cfg.horizon
    best_total, best_seq = math.inf, None
    for seq in itertools.product(order, repeat=p):
        pose = est
        charged = []
        for j, idx in enumerate(seq):
            u = cfg.control(cfg.action_set[idx])
            pose = step_deterministic(pose, u, cfg.dt)
            c = step_cost(m, pose, u, cfg)
            if j == p - 1 and not cfg.include_terminal and c != math.inf:
                c = 0.0
            charged.append(c)
        total = 0.0
        for c in reversed(charged):
            total = c + total
        if best_seq is None or total < best_total:
            best_total, best_seq = total, seq
    if best_total == math.inf:
        raise NoFeasiblePlan(f"every {p}-step sequence from {est} leaves the map")
    controls = [cfg.action_set[i] for i in best_seq]
    return controls[0], PlannedPath(controls, rollout(est, controls, cfg), best_total)

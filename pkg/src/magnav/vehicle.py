"""Unicycle kinematics and the scalar magnetometer model.

Position advances with the heading held *before* the update:

    x' = x + V cos(theta) dt
    y' = y + V sin(theta) dt
    theta' = theta + omega dt

Every stochastic function takes an explicit ``numpy.random.Generator``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .fieldmap import GridMap, field_with_heading

STEP_LENGTH_REF = 0.05  # m of travel per sigma_xy_per_step
STEP_TURN_REF = math.radians(10.0)  # rad of rotation per sigma_theta_per_step


def wrap_angle(a: float) -> float:
    """Map an angle onto (-pi, pi]."""
    r = math.remainder(a, 2.0 * math.pi)
    if r == -math.pi:
        return math.pi
    return r


def wrap_angles(a: np.ndarray) -> np.ndarray:
    """Array version of :func:`wrap_angle`; in-range entries pass through untouched."""
    a = np.asarray(a, dtype=np.float64)
    out = a.copy()
    bad = ~((a > -math.pi) & (a <= math.pi))
    if bad.any():
        out[bad] = [wrap_angle(v) for v in a[bad]]
    return out


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class ControlInput:
    v: float
    omega: float

    def __post_init__(self):
        if not self.v >= 0:
            raise InvalidArgument(f"forward speed must be >= 0, got {self.v}")


@dataclass(frozen=True)
class NoiseConfig:
    """Process and sensor noise.

    ``sigma_xy_per_step`` is the 1-sigma position error per 5 cm travelled and
    ``sigma_theta_per_step`` the heading error per 10 degrees turned; both
    scale linearly with the actual motion.
    """

    sigma_z: float = 100.0
    sigma_xy_per_step: float = 0.01
    sigma_theta_per_step: float = math.radians(1.0)

    def __post_init__(self):
        for name in ("sigma_z", "sigma_xy_per_step", "sigma_theta_per_step"):
            if not getattr(self, name) >= 0:
                raise InvalidArgument(f"{name} must be >= 0")

    def motion_sigmas(self, u: ControlInput, dt: float) -> tuple[float, float]:
        dist = u.v * dt
        turn = abs(u.omega * dt)
        return (self.sigma_xy_per_step * (dist / STEP_LENGTH_REF),
                self.sigma_theta_per_step * (turn / STEP_TURN_REF))


def step_deterministic(pose: Pose, u: ControlInput, dt: float, turn_first: bool = False) -> Pose:
    """One unicycle step.

    With ``turn_first`` the heading update is applied before translating
    (rotate-then-drive), which the one-step EER planner relies on.
    """
    if not dt > 0:
        raise InvalidArgument(f"dt must be > 0, got {dt}")
    theta = wrap_angle(pose.theta + u.omega * dt)
    drive = theta if turn_first else pose.theta
    return Pose(pose.x + u.v * math.cos(drive) * dt,
                pose.y + u.v * math.sin(drive) * dt,
                theta)


def step_noisy(pose: Pose, u: ControlInput, dt: float, noise: NoiseConfig,
               rng: np.random.Generator, turn_first: bool = False) -> Pose:
    """Deterministic step plus inertial-frame Gaussian noise scaled to the motion.

    Zero motion or zero sigmas add nothing (and draw nothing from ``rng``).
    """
    nxt = step_deterministic(pose, u, dt, turn_first)
    s_xy, s_th = noise.motion_sigmas(u, dt)
    x, y, th = nxt.x, nxt.y, nxt.theta
    if s_xy > 0:
        dx, dy = rng.normal(0.0, s_xy, size=2)
        x, y = x + float(dx), y + float(dy)
    if s_th > 0:
        th = wrap_angle(th + float(rng.normal(0.0, s_th)))
    return Pose(x, y, th)


def measure(m: GridMap, pose: Pose, sigma_z: float, rng: np.random.Generator) -> float:
    """Noisy scalar magnetometer reading at ``pose``."""
    h = field_with_heading(m, pose)
    if sigma_z > 0:
        return h + float(rng.normal(0.0, sigma_z))
    return h

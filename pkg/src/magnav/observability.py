"""Local observability of position from scalar field readings.

For the unicycle with a field measurement ``h(x, y)``, the zeroth and first
Lie derivatives are ``h`` and ``grad h . f`` with ``f = [V cos(theta), V sin(theta)]``.
Differentiating both with respect to position gives the square matrix

    O = [[ h_x,                      h_y                    ],
         [ h_xx f_x + h_xy f_y,      h_xy f_x + h_yy f_y    ]]

whose Gramian ``O^T O`` has determinant ``det(O)**2``. The planner cost is
``1 / max(det, eps_det)``.

Units: row one is nT/m, row two nT/(m s), so the determinant carries
nT^4 / (m^4 s^2). ``eps_det`` and planner weights are therefore tied to
the map's field scale; rescaling the map by ``c`` rescales the
determinant by ``c**4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import OutOfBounds
from .fieldmap import GridMap, field_with_heading
from .vehicle import ControlInput, Pose

EPS_DET = 1e-12


@dataclass(frozen=True)
class ObservabilityReport:
    o_nl: np.ndarray
    gramian_det: float
    cost: float


def _derivs(m: GridMap, x, y):
    d = _backend.kernels.stencil_derivs(m.values, m.origin_x, m.origin_y, m.resolution,
                                        float(x), float(y))
    if math.isnan(d[0]):
        raise OutOfBounds(f"stencil at ({x}, {y}) leaves map bounds {m.bounds}")
    return d


def lie_derivatives(m: GridMap, pose: Pose, u: ControlInput) -> tuple[float, float]:
    """``(L0, L1)``: the reading itself (nT) and its rate along the motion (nT/s)."""
    _, gx, gy, _, _, _ = _derivs(m, pose.x, pose.y)
    l0 = field_with_heading(m, pose)
    l1 = gx * (u.v * math.cos(pose.theta)) + gy * (u.v * math.sin(pose.theta))
    return l0, l1


def observability_matrix(m: GridMap, pose: Pose, u: ControlInput) -> np.ndarray:
    _, gx, gy, hxx, hxy, hyy = _derivs(m, pose.x, pose.y)
    fx = u.v * math.cos(pose.theta)
    fy = u.v * math.sin(pose.theta)
    return np.array([[gx, gy],
                     [hxx * fx + hxy * fy, hxy * fx + hyy * fy]])


def gramian_det(o_nl) -> float:
    """``det(O^T O)`` for a 2x2 ``O``, computed as ``det(O)**2`` (never negative)."""
    o = np.asarray(o_nl, dtype=np.float64)
    if o.shape != (2, 2):
        raise ValueError(f"expected a 2x2 observability matrix, got shape {o.shape}")
    return _backend.kernels.gramian_det_2x2(float(o[0, 0]), float(o[0, 1]),
                                            float(o[1, 0]), float(o[1, 1]))


def obs_cost(det: float, eps_det: float = EPS_DET) -> float:
    return 1.0 / max(det, eps_det)


def analyze(m: GridMap, pose: Pose, u: ControlInput, eps_det: float = EPS_DET) -> ObservabilityReport:
    o = observability_matrix(m, pose, u)
    det = gramian_det(o)
    return ObservabilityReport(o, det, obs_cost(det, eps_det))

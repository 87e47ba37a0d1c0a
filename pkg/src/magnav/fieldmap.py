"""Scalar magnetic-anomaly maps on a regular 2-D grid.

Node ``(i, j)`` sits at ``(origin_x + i * resolution, origin_y + j * resolution)``
and ``values[i, j]`` holds the total-field sample there in nT. Between nodes
the field is bilinearly interpolated; derivatives are central finite
differences with the step equal to the grid resolution, so a stencil always
spans whole cells and never straddles an interpolation kink asymmetrically.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidArgument, MalformedMap, OutOfBounds

MAGIC = "MAGMAP 1"


@dataclass(frozen=True)
class GaussianSource:
    cx: float
    cy: float
    amplitude: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidArgument(f"source sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class GridMap:
    """Immutable grid of field samples.

    Attributes:
        origin_x, origin_y: position of node (0, 0) in meters.
        resolution: node spacing in meters.
        values: ``(nx, ny)`` array in nT, read-only after construction.
        heading_amp: amplitude (nT) of the global heading-dependent offset
            ``heading_amp * sin(theta + heading_phase)``; 0 disables it.
        heading_phase: phase of that offset in radians.
    """

    origin_x: float
    origin_y: float
    resolution: float
    values: np.ndarray = field(repr=False)
    heading_amp: float = 0.0
    heading_phase: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if vals.ndim != 2 or vals.shape[0] < 2 or vals.shape[1] < 2:
            raise InvalidArgument(f"values must be a 2-D array with nx, ny >= 2, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("map values must be finite")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise InvalidArgument(f"resolution must be > 0, got {self.resolution}")
        if not self.heading_amp >= 0:
            raise InvalidArgument(f"heading_amp must be >= 0, got {self.heading_amp}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        for name in ("origin_x", "origin_y", "resolution", "heading_amp", "heading_phase"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """``(x_min, x_max, y_min, y_max)`` of the node lattice."""
        return (self.origin_x, self.origin_x + (self.nx - 1) * self.resolution,
                self.origin_y, self.origin_y + (self.ny - 1) * self.resolution)

    def node_xy(self, i, j):
        return self.origin_x + i * self.resolution, self.origin_y + j * self.resolution

    def contains(self, x, y, margin=0.0) -> bool:
        x0, x1, y0, y1 = self.bounds
        return x0 + margin <= x <= x1 - margin and y0 + margin <= y <= y1 - margin

    def heading_offset(self, theta) -> float:
        if self.heading_amp == 0.0:
            return 0.0
        return self.heading_amp * math.sin(theta + self.heading_phase)

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return (self.origin_x == other.origin_x and self.origin_y == other.origin_y
                and self.resolution == other.resolution
                and self.heading_amp == other.heading_amp
                and self.heading_phase == other.heading_phase
                and np.array_equal(self.values, other.values))

    __hash__ = None


def _kargs(m):
    return m.values, m.origin_x, m.origin_y, m.resolution


def field_at(m: GridMap, x: float, y: float) -> float:
    """Bilinearly interpolated field at ``(x, y)``; exact at nodes."""
    v = _backend.kernels.field_scalar(*_kargs(m), float(x), float(y))
    if math.isnan(v):
        raise OutOfBounds(f"({x}, {y}) is outside map bounds {m.bounds}")
    return v


def field_many(m: GridMap, xs, ys) -> np.ndarray:
    """Vectorised :func:`field_at`; off-map points come back as NaN."""
    return _backend.kernels.field_batch(*_kargs(m), xs, ys)


def field_with_heading(m: GridMap, pose) -> float:
    return field_at(m, pose.x, pose.y) + m.heading_offset(pose.theta)


def _derivs(m, x, y):
    d = _backend.kernels.stencil_derivs(*_kargs(m), float(x), float(y))
    if math.isnan(d[0]):
        raise OutOfBounds(
            f"finite-difference stencil at ({x}, {y}) with step {m.resolution} leaves map bounds {m.bounds}")
    return d


def gradient_at(m: GridMap, x: float, y: float) -> tuple[float, float]:
    """Central-difference gradient (nT/m)."""
    _, gx, gy, _, _, _ = _derivs(m, x, y)
    return gx, gy


def hessian_at(m: GridMap, x: float, y: float) -> np.ndarray:
    """Symmetric 2x2 Hessian (nT/m^2) from second and cross differences."""
    _, _, _, hxx, hxy, hyy = _derivs(m, x, y)
    return np.array([[hxx, hxy], [hxy, hyy]])


def generate_gaussian_map(sources, bounds, resolution, baseline=0.0,
                          heading_amp=0.0, heading_phase=0.0) -> GridMap:
    """Sample ``baseline + sum of isotropic Gaussian bumps`` onto a grid.

    ``bounds`` is ``(x_min, x_max, y_min, y_max)``. The node count per axis is
    chosen so the lattice covers the bounds (the last node lands on the upper
    bound when the extent is a whole multiple of ``resolution``).
    """
    if not resolution > 0:
        raise InvalidArgument(f"resolution must be > 0, got {resolution}")
    x0, x1, y0, y1 = (float(b) for b in bounds)
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgument(f"degenerate bounds {bounds}")
    nx = int(math.floor((x1 - x0) / resolution + 1e-9)) + 1
    ny = int(math.floor((y1 - y0) / resolution + 1e-9)) + 1
    if nx < 2 or ny < 2:
        raise InvalidArgument(f"bounds {bounds} hold fewer than 2 nodes per axis at resolution {resolution}")
    xs = x0 + np.arange(nx) * resolution
    ys = y0 + np.arange(ny) * resolution
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    values = np.full((nx, ny), float(baseline))
    for s in sources:
        r2 = (gx - s.cx) ** 2 + (gy - s.cy) ** 2
        values += s.amplitude * np.exp(-r2 / (2.0 * s.sigma ** 2))
    return GridMap(x0, y0, resolution, values, heading_amp, heading_phase)


def save_map(m: GridMap, path) -> None:
    """Write the ``MAGMAP 1`` text format (values row-major, 17 significant digits)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(MAGIC + "\n")
        fh.write(f"{m.origin_x!r} {m.origin_y!r} {m.resolution!r} {m.nx} {m.ny} "
                 f"{m.heading_amp!r} {m.heading_phase!r}\n")
        for row in m.values:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_map(path) -> GridMap:
    """Parse a ``MAGMAP 1`` file.

    Raises:
        OSError: the file cannot be read.
        MalformedMap: bad magic line, header, or value count.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"map file not found: {path}")
    with open(path, encoding="ascii") as fh:
        lines = [(n, ln.split("#", 1)[0].strip()) for n, ln in enumerate(fh, start=1)]
    lines = [(n, ln) for n, ln in lines if ln]
    if not lines or lines[0][1] != MAGIC:
        raise MalformedMap(f"{path}: first line must be '{MAGIC}'")
    if len(lines) < 2:
        raise MalformedMap(f"{path}: missing header line")
    hline, header = lines[1]
    parts = header.split()
    if len(parts) != 7:
        raise MalformedMap(f"{path}:{hline}: header needs 7 fields "
                           "(origin_x origin_y resolution nx ny heading_amp heading_phase)")
    try:
        ox, oy, res = (float(p) for p in parts[:3])
        nx, ny = int(parts[3]), int(parts[4])
        amp, phase = float(parts[5]), float(parts[6])
    except ValueError as exc:
        raise MalformedMap(f"{path}:{hline}: {exc}") from None
    tokens = []
    for n, ln in lines[2:]:
        for tok in ln.split():
            try:
                tokens.append(float(tok))
            except ValueError:
                raise MalformedMap(f"{path}:{n}: not a number: {tok!r}") from None
    if len(tokens) != nx * ny:
        raise MalformedMap(f"{path}: header declares {nx}x{ny}={nx * ny} values, found {len(tokens)}")
    try:
        return GridMap(ox, oy, res, np.array(tokens).reshape(nx, ny), amp, phase)
    except InvalidArgument as exc:
        raise MalformedMap(f"{path}: {exc}") from None

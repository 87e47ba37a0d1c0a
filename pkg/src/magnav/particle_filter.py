"""Monte Carlo localization against a scalar field map.

A :class:`ParticleSet` holds poses as an ``(N, 3)`` array of ``[x, y, theta]``
rows and normalized weights as an ``(N,)`` array. Operations return new sets;
inputs are never modified.

RNG stream assignment: every stochastic operation draws from the single
generator it is given, vectorised in particle order (particle ``i`` gets the
``i``-th normal of each draw), so a run is reproducible from its seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import AmbiguousHeading, DegenerateWeights, InvalidArgument
from .fieldmap import GridMap, field_many
from .vehicle import ControlInput, NoiseConfig, Pose, wrap_angle, wrap_angles


@dataclass(frozen=True)
class Particle:
    pose: Pose
    weight: float


@dataclass(frozen=True, eq=False)
class ParticleSet:
    poses: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        poses = np.array(self.poses, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        if poses.ndim != 2 or poses.shape[1] != 3 or poses.shape[0] < 1:
            raise InvalidArgument(f"poses must be (N, 3) with N >= 1, got {poses.shape}")
        if weights.shape != (poses.shape[0],):
            raise InvalidArgument("weights must have one entry per particle")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidArgument("weights must be finite and non-negative")
        poses.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.poses.shape[0]

    def __getitem__(self, i) -> Particle:
        x, y, th = self.poses[i]
        return Particle(Pose(float(x), float(y), float(th)), float(self.weights[i]))

    @property
    def particles(self) -> list[Particle]:
        return [self[i] for i in range(len(self))]


def init(mean: Pose, cov, n: int, rng: np.random.Generator) -> ParticleSet:
    """Draw ``n`` poses from N(mean, cov) with uniform weights."""
    if n < 1:
        raise InvalidArgument(f"particle count must be >= 1, got {n}")
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (3, 3) or not np.allclose(cov, cov.T):
        raise InvalidArgument("initial covariance must be a symmetric 3x3 matrix")
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -1e-12 * max(1.0, evals.max()):
        raise InvalidArgument("initial covariance is not positive semi-definite")
    # eigen factor instead of Cholesky so singular (e.g. all-zero) covariances work
    factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
    z = rng.standard_normal((n, 3))
    poses = mean.as_array() + z @ factor.T
    poses[:, 2] = wrap_angles(poses[:, 2])
    return ParticleSet(poses, np.full(n, 1.0 / n))


def propagate(ps: ParticleSet, u: ControlInput, dt: float, noise: NoiseConfig,
              rng: np.random.Generator) -> ParticleSet:
    """Advance every particle through the noisy unicycle step; weights unchanged."""
    if not dt > 0:
        raise InvalidArgument(f"dt must be > 0, got {dt}")
    p = ps.poses
    n = len(ps)
    th = p[:, 2]
    x = p[:, 0] + u.v * np.cos(th) * dt
    y = p[:, 1] + u.v * np.sin(th) * dt
    th = wrap_angles(th + u.omega * dt)
    s_xy, s_th = noise.motion_sigmas(u, dt)
    if s_xy > 0:
        d = rng.normal(0.0, s_xy, size=(n, 2))
        x = x + d[:, 0]
        y = y + d[:, 1]
    if s_th > 0:
        th = wrap_angles(th + rng.normal(0.0, s_th, size=n))
    return ParticleSet(np.column_stack([x, y, th]), ps.weights)


def log_likelihoods(ps: ParticleSet, m: GridMap, z: float, sigma_z: float) -> np.ndarray:
    """Gaussian log-likelihood of reading ``z`` per particle (up to a constant).

    Off-map particles get ``-inf``.
    """
    h = field_many(m, ps.poses[:, 0], ps.poses[:, 1])
    if m.heading_amp != 0.0:
        h = h + m.heading_amp * np.sin(ps.poses[:, 2] + m.heading_phase)
    r = z - h
    ll = -(r * r) / (2.0 * sigma_z * sigma_z)
    return np.where(np.isnan(ll), -np.inf, ll)


def update_weights(ps: ParticleSet, m: GridMap, z: float, sigma_z: float) -> ParticleSet:
    """Reweight by the measurement likelihood and renormalize.

    Accumulates in log space so a sharp likelihood cannot underflow every
    weight at once.

    Raises:
        DegenerateWeights: no particle has non-zero posterior weight.
    """
    if not sigma_z > 0:
        raise InvalidArgument(f"sigma_z must be > 0, got {sigma_z}")
    with np.errstate(divide="ignore"):
        logw = np.log(ps.weights) + log_likelihoods(ps, m, z, sigma_z)
    top = logw.max()
    if not np.isfinite(top):
        raise DegenerateWeights("all particles have zero likelihood (off-map or underflow)")
    w = np.exp(logw - top)
    return ParticleSet(ps.poses, w / w.sum())


def effective_sample_size(ps: ParticleSet) -> float:
    return 1.0 / float(np.sum(ps.weights ** 2))


def resample_systematic(ps: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Low-variance resampling: one uniform offset, N evenly spaced pointers."""
    n = len(ps)
    idx = _backend.kernels.systematic_indices(ps.weights, float(rng.random()))
    return ParticleSet(ps.poses[idx], np.full(n, 1.0 / n))


def maybe_resample(ps: ParticleSet, rng: np.random.Generator,
                   threshold: float = 0.5) -> tuple[ParticleSet, bool]:
    """Resample when ESS drops below ``threshold * N``."""
    if effective_sample_size(ps) < threshold * len(ps):
        return resample_systematic(ps, rng), True
    return ps, False


def estimate_mean(ps: ParticleSet) -> Pose:
    """Weighted mean position and circular-mean heading."""
    w = ps.weights
    p = ps.poses
    s = float(np.dot(w, np.sin(p[:, 2])))
    c = float(np.dot(w, np.cos(p[:, 2])))
    if math.hypot(s, c) < 1e-12:
        raise AmbiguousHeading("particle headings cancel; circular mean undefined")
    return Pose(float(np.dot(w, p[:, 0])), float(np.dot(w, p[:, 1])),
                wrap_angle(math.atan2(s, c)))


def sample_covariance(ps: ParticleSet) -> np.ndarray:
    """Weighted 3x3 covariance about :func:`estimate_mean`, heading residuals wrapped."""
    mean = estimate_mean(ps)
    d = ps.poses - mean.as_array()
    d[:, 2] = wrap_angles(d[:, 2])
    cov = (d * ps.weights[:, None]).T @ d
    return 0.5 * (cov + cov.T)


def trace_position(ps: ParticleSet) -> float:
    """Position-only uncertainty, ``Cov_xx + Cov_yy`` in m^2."""
    cov = sample_covariance(ps)
    return float(cov[0, 0] + cov[1, 1])

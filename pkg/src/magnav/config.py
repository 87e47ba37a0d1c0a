"""Simulation configuration and its flat TOML file format.

Every key is top-level (no tables). Angles in the file are in degrees and
converted to radians on load; everything else is SI. ``seed``, ``planner``,
``start`` and ``goal`` are required, everything else has a default, and
unknown keys are rejected. Environment variables are never consulted.

Exactly one map source must be given: ``map_file`` (a ``MAGMAP 1`` file),
``map_scenario`` (``"lab"`` or ``"single_gaussian"``), or ``map_sources``
with ``map_bounds``/``map_resolution``.
"""
from __future__ import annotations

import dataclasses
import math
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .belief import EerPlannerConfig
from .errors import ConfigError
from .fieldmap import GaussianSource, GridMap, generate_gaussian_map, load_map
from .obs_planner import ObsPlannerConfig, PlannerWeights
from .scenarios import scenario_map
from .vehicle import NoiseConfig, Pose

PLANNERS = ("observability", "eer", "straight")


@dataclass(frozen=True)
class SimConfig:
    seed: int
    planner: str
    start: Pose
    goal: tuple[float, float]
    goal_radius: float = 0.25
    max_steps: int = 200
    # map source
    map_file: Optional[str] = None
    map_scenario: Optional[str] = None
    map_sources: Optional[tuple[GaussianSource, ...]] = None
    map_bounds: Optional[tuple[float, float, float, float]] = None
    map_resolution: float = 0.25
    map_baseline: float = 0.0
    heading_amp: float = 0.0
    heading_phase: float = 0.0
    # vehicle and noise
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    v: float = 0.2
    dt: float = 1.0
    weights: PlannerWeights = field(default_factory=PlannerWeights)
    # observability planner
    horizon: int = 5
    obs_actions: tuple[float, ...] = tuple(math.radians(a) for a in (-45.0, -22.0, 0.0, 22.0, 45.0))
    eps_det: float = 1e-12
    include_terminal: bool = False
    det_ref: Optional[float] = None
    # EER planner
    eer_rates: tuple[float, ...] = tuple(math.radians(a) for a in (-40.0, -20.0, 0.0, 20.0, 40.0))
    belief_resolution: float = 0.25
    motion_kernel_sigma: Optional[float] = None
    n_z: int = 21
    # particle filter
    n_particles: int = 1000
    p0_std: tuple[float, float, float] = (0.1, 0.1, math.radians(2.0))
    resample_threshold: float = 0.5
    measurement_period: int = 1
    fast_measurement_period: int = 1
    obs_rate_threshold: Optional[float] = None

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ConfigError(f"planner must be one of {PLANNERS}, got {self.planner!r}")
        if not self.goal_radius > 0:
            raise ConfigError("goal_radius must be > 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if self.measurement_period < 1 or self.fast_measurement_period < 1:
            raise ConfigError("measurement periods must be >= 1")
        given = [k for k in ("map_file", "map_scenario", "map_sources") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ConfigError(f"exactly one of map_file, map_scenario, map_sources is required (got {given or 'none'})")
        if self.map_sources is not None and self.map_bounds is None:
            raise ConfigError("map_sources requires map_bounds")

    @property
    def p0(self) -> np.ndarray:
        return np.diag(np.square(self.p0_std))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def with_ratio(self, ratio: float) -> "SimConfig":
        """Same config with ``w_obs = ratio * w_goal``."""
        w = self.weights
        return self.replace(weights=PlannerWeights(w.w_goal, ratio * w.w_goal))

    def build_map(self) -> GridMap:
        if self.map_file is not None:
            m = load_map(self.map_file)
        elif self.map_scenario is not None:
            m = scenario_map(self.map_scenario)
        else:
            m = generate_gaussian_map(self.map_sources, self.map_bounds, self.map_resolution,
                                      self.map_baseline)
        if self.heading_amp:
            m = GridMap(m.origin_x, m.origin_y, m.resolution, m.values, self.heading_amp, self.heading_phase)
        return m

    def obs_planner(self, det_ref: float = 1.0) -> ObsPlannerConfig:
        return ObsPlannerConfig(goal=self.goal, horizon=self.horizon, action_set=self.obs_actions,
                                v=self.v, dt=self.dt, weights=self.weights, eps_det=self.eps_det,
                                include_terminal=self.include_terminal, det_ref=det_ref)

    def eer_planner(self) -> EerPlannerConfig:
        kernel = self.motion_kernel_sigma
        if kernel is None:
            kernel = EerPlannerConfig.kernel_sigma_for(self.noise, self.v, self.dt)
        return EerPlannerConfig(goal=self.goal, action_set=self.eer_rates, v=self.v, dt=self.dt,
                                weights=self.weights, sigma_z=self.noise.sigma_z,
                                motion_kernel_sigma=kernel, n_z_quadrature=self.n_z)


# file key -> validator/converter
_NUM = (int, float)


def _deg(x):
    return math.radians(float(x))


def _floats(n):
    def conv(x):
        if not isinstance(x, list) or len(x) != n or not all(isinstance(v, _NUM) and not isinstance(v, bool) for v in x):
            raise TypeError(f"expected a list of {n} numbers")
        return tuple(float(v) for v in x)
    return conv


def _float_list(x):
    if not isinstance(x, list) or not x or not all(isinstance(v, _NUM) and not isinstance(v, bool) for v in x):
        raise TypeError("expected a non-empty list of numbers")
    return tuple(float(v) for v in x)


def _number(x):
    if isinstance(x, bool) or not isinstance(x, _NUM):
        raise TypeError("expected a number")
    return float(x)


def _integer(x):
    if isinstance(x, bool) or not isinstance(x, int):
        raise TypeError("expected an integer")
    return x


def _string(x):
    if not isinstance(x, str):
        raise TypeError("expected a string")
    return x


def _boolean(x):
    if not isinstance(x, bool):
        raise TypeError("expected true or false")
    return x


def _sources(x):
    if not isinstance(x, list):
        raise TypeError("expected a list of [cx, cy, amplitude, sigma] entries")
    return tuple(GaussianSource(*_floats(4)(s)) for s in x)


SCHEMA = {
    "seed": _integer,
    "planner": _string,
    "start": _floats(3),          # [x m, y m, heading deg]
    "goal": _floats(2),
    "goal_radius": _number,
    "max_steps": _integer,
    "map_file": _string,
    "map_scenario": _string,
    "map_sources": _sources,
    "map_bounds": _floats(4),
    "map_resolution": _number,
    "map_baseline": _number,
    "heading_amp": _number,
    "heading_phase_deg": _number,
    "sigma_z": _number,
    "sigma_xy_per_step": _number,
    "sigma_theta_per_step_deg": _number,
    "v": _number,
    "dt": _number,
    "w_goal": _number,
    "w_obs": _number,
    "horizon": _integer,
    "obs_actions_deg": _float_list,
    "eps_det": _number,
    "include_terminal": _boolean,
    "det_ref": _number,
    "eer_rates_deg": _float_list,
    "belief_resolution": _number,
    "motion_kernel_sigma": _number,
    "n_z": _integer,
    "n_particles": _integer,
    "p0_std": _floats(3),         # [m, m, deg]
    "resample_threshold": _number,
    "measurement_period": _integer,
    "fast_measurement_period": _integer,
    "obs_rate_threshold": _number,
}
REQUIRED = ("seed", "planner", "start", "goal")


def _line_of(text, key):
    m = re.search(rf"^[ \t]*{re.escape(key)}[ \t]*=", text, flags=re.MULTILINE)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(path, text, key):
    line = _line_of(text, key)
    return f"{path}:{line}" if line else str(path)


def parse_config(text: str, path="<config>", base_dir=None) -> SimConfig:
    """Parse TOML text into a :class:`SimConfig`.

    Raises:
        ConfigError: syntax errors, unknown or missing keys, bad types or values.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(f"{_where(path, text, key)}: unknown key {key!r}")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")
    vals = {}
    for key, value in raw.items():
        try:
            vals[key] = SCHEMA[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{_where(path, text, key)}: {key}: {exc}") from None

    kw = {}
    noise_kw = {}
    w = PlannerWeights()
    w_goal, w_obs = vals.pop("w_goal", w.w_goal), vals.pop("w_obs", w.w_obs)
    x, y, hdg = vals.pop("start")
    kw["start"] = Pose(x, y, math.radians(hdg))
    if "sigma_z" in vals:
        noise_kw["sigma_z"] = vals.pop("sigma_z")
    if "sigma_xy_per_step" in vals:
        noise_kw["sigma_xy_per_step"] = vals.pop("sigma_xy_per_step")
    if "sigma_theta_per_step_deg" in vals:
        noise_kw["sigma_theta_per_step"] = _deg(vals.pop("sigma_theta_per_step_deg"))
    if "heading_phase_deg" in vals:
        kw["heading_phase"] = _deg(vals.pop("heading_phase_deg"))
    if "obs_actions_deg" in vals:
        kw["obs_actions"] = tuple(_deg(a) for a in vals.pop("obs_actions_deg"))
    if "eer_rates_deg" in vals:
        kw["eer_rates"] = tuple(_deg(a) for a in vals.pop("eer_rates_deg"))
    if "p0_std" in vals:
        sx, sy, sth = vals.pop("p0_std")
        kw["p0_std"] = (sx, sy, _deg(sth))
    if "map_file" in vals and base_dir is not None and not os.path.isabs(vals["map_file"]):
        vals["map_file"] = os.path.join(base_dir, vals["map_file"])
    kw.update(vals)
    try:
        return SimConfig(noise=NoiseConfig(**noise_kw), weights=PlannerWeights(w_goal, w_obs), **kw)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path, base_dir=os.path.dirname(os.path.abspath(path)))


# genmap spec files: the same flat TOML dialect, describing one map.
MAP_SCHEMA = {
    "scenario": _string,
    "sources": _sources,
    "bounds": _floats(4),
    "resolution": _number,
    "baseline": _number,
    "heading_amp": _number,
    "heading_phase_deg": _number,
}


def parse_map_spec(text: str, path="<map spec>") -> GridMap:
    """Build a map from a genmap spec.

    Either ``scenario`` names a bundled map, or ``sources`` and ``bounds``
    describe Gaussian anomalies (``resolution`` defaults to 0.25 m). The
    heading keys apply to both forms.

    Raises:
        ConfigError: syntax errors, unknown keys, bad types, or an
            inconsistent combination of keys.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    vals = {}
    for key, value in raw.items():
        if key not in MAP_SCHEMA:
            raise ConfigError(f"{_where(path, text, key)}: unknown key {key!r}")
        try:
            vals[key] = MAP_SCHEMA[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{_where(path, text, key)}: {key}: {exc}") from None
    amp = vals.pop("heading_amp", 0.0)
    phase = _deg(vals.pop("heading_phase_deg", 0.0))
    try:
        if "scenario" in vals:
            if len(vals) > 1:
                raise ConfigError(f"{path}: 'scenario' cannot be combined with {sorted(set(vals) - {'scenario'})}")
            m = scenario_map(vals["scenario"])
            return GridMap(m.origin_x, m.origin_y, m.resolution, m.values, amp, phase)
        for key in ("sources", "bounds"):
            if key not in vals:
                raise ConfigError(f"{path}: missing required key {key!r} (or give 'scenario')")
        return generate_gaussian_map(vals["sources"], vals["bounds"], vals.get("resolution", 0.25),
                                     vals.get("baseline", 0.0), amp, phase)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def load_map_spec(path) -> GridMap:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read map spec {path}: {exc}") from None
    return parse_map_spec(text, path)

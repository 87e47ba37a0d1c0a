"""Closed-loop simulation, ratio sweeps and CSV trace I/O.

Random streams: ``SeedSequence(seed).spawn(3)`` yields independent generators
for the truth motion, the sensor and the estimator (particle initialisation
and resampling). Keeping them apart means a logged trace can be replayed
through the estimator alone, see :func:`replay_observability`.

Step 0 is the initial measurement update at the start pose, with no control.
Step ``k >= 1`` plans from the step ``k-1`` estimate, moves the truth,
propagates the estimator, measures (when scheduled), updates, and logs the
state after that full cycle. The run stops once the estimate is within
``goal_radius`` of the goal or after ``max_steps`` controls.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from . import belief as bel
from . import particle_filter as pf
from .config import SimConfig
from .errors import ConfigError, InvalidArgument, MagNavError, SimulationError
from .fieldmap import GridMap
from .obs_planner import ObsPlannerConfig, plan, tie_break_order
from .vehicle import ControlInput, Pose, measure, step_noisy, wrap_angle

TRACE_HEADER = ("step", "truth_x", "truth_y", "truth_theta", "est_x", "est_y", "est_theta",
                "trace_pos", "entropy", "meas_nT", "v", "omega", "gramian_det")
DET_REF_FRACTION = 0.01
RATE_THRESHOLD_PERCENTILE = 75.0
SAMPLE_HEADINGS = (0.0, 0.5 * math.pi, math.pi, -0.5 * math.pi)
FLAG_RATIO = 2.0


@dataclass(frozen=True)
class SimTraceRecord:
    step: int
    truth: Pose
    estimate: Pose
    trace_position: float
    entropy: Optional[float] = None
    measurement: Optional[float] = None
    control: Optional[ControlInput] = None
    gramian_det: Optional[float] = None


def _rngs(seed):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def _gramian_det(m: GridMap, pose: Pose, v: float) -> Optional[float]:
    """Raw Gramian determinant at ``pose``; ``None`` if the stencil leaves the map."""
    k = _backend.kernels
    _, gx, gy, hxx, hxy, hyy = k.stencil_derivs(m.values, m.origin_x, m.origin_y, m.resolution,
                                                float(pose.x), float(pose.y))
    if math.isnan(gx):
        return None
    fx, fy = v * math.cos(pose.theta), v * math.sin(pose.theta)
    return k.gramian_det_2x2(gx, gy, hxx * fx + hxy * fy, hxy * fx + hyy * fy)


def map_det_samples(m: GridMap, v: float) -> np.ndarray:
    """Gramian determinants at every node whose stencil fits, at four headings."""
    out = []
    for i in range(m.nx):
        for j in range(m.ny):
            x, y = m.node_xy(i, j)
            for th in SAMPLE_HEADINGS:
                d = _gramian_det(m, Pose(x, y, th), v)
                if d is not None:
                    out.append(d)
    if not out:
        raise InvalidArgument("map is too small to evaluate any Gramian determinant")
    return np.array(out)


def resolve_det_ref(cfg: SimConfig, m: GridMap) -> float:
    if cfg.det_ref is not None:
        return cfg.det_ref
    # Anchored to the best-observed state so flat margins don't shift the scale.
    ref = DET_REF_FRACTION * float(map_det_samples(m, cfg.v).max())
    return ref if ref > 0 else 1.0


def resolve_rate_threshold(cfg: SimConfig, m: GridMap) -> float:
    if cfg.obs_rate_threshold is not None:
        return cfg.obs_rate_threshold
    return float(np.percentile(map_det_samples(m, cfg.v), RATE_THRESHOLD_PERCENTILE))


def _check_endpoints(cfg: SimConfig, m: GridMap):
    if not m.contains(cfg.start.x, cfg.start.y):
        raise ConfigError(f"start ({cfg.start.x}, {cfg.start.y}) is outside map bounds {m.bounds}")
    if not m.contains(*cfg.goal):
        raise ConfigError(f"goal {cfg.goal} is outside map bounds {m.bounds}")


def _at_goal(cfg: SimConfig, est: Pose) -> bool:
    return math.hypot(est.x - cfg.goal[0], est.y - cfg.goal[1]) <= cfg.goal_radius


def straight_action(est: Pose, cfg: ObsPlannerConfig) -> float:
    """Heading change from ``cfg.action_set`` that best points at the goal."""
    bearing = math.atan2(cfg.goal[1] - est.y, cfg.goal[0] - est.x)
    best, best_err = None, math.inf
    for i in tie_break_order(cfg.action_set):
        err = abs(wrap_angle(bearing - wrap_angle(est.theta + cfg.action_set[i])))
        if err < best_err:
            best, best_err = i, err
    return cfg.action_set[best]


def _pf_update(ps, m, z, cfg, rng):
    ps = pf.update_weights(ps, m, z, cfg.noise.sigma_z)
    ps, _ = pf.maybe_resample(ps, rng, cfg.resample_threshold)
    return ps


def run_observability_sim(cfg: SimConfig, m: Optional[GridMap] = None) -> list[SimTraceRecord]:
    """Particle-filter closed loop driven by the observability (or straight) planner.

    The measurement period is ``fast_measurement_period`` at steps whose
    previous estimate had a Gramian determinant above the rate threshold and
    ``measurement_period`` otherwise; step ``k`` measures when ``k`` is a
    multiple of the active period.

    Raises:
        ConfigError: the planner kind is ``eer`` or start/goal lie off the map.
        SimulationError: any failure inside the loop, tagged with its step.
    """
    if cfg.planner == "eer":
        raise ConfigError("run_observability_sim needs planner 'observability' or 'straight'")
    m = cfg.build_map() if m is None else m
    _check_endpoints(cfg, m)
    pcfg = cfg.obs_planner(det_ref=resolve_det_ref(cfg, m) if cfg.planner == "observability" else 1.0)
    switching = cfg.measurement_period != cfg.fast_measurement_period
    threshold = resolve_rate_threshold(cfg, m) if switching else math.inf
    truth_rng, sensor_rng, filt_rng = _rngs(cfg.seed)
    sigma_z = cfg.noise.sigma_z

    step = 0
    try:
        truth = cfg.start
        ps = pf.init(truth, cfg.p0, cfg.n_particles, filt_rng)
        z = measure(m, truth, sigma_z, sensor_rng)
        ps = _pf_update(ps, m, z, cfg, filt_rng)
        est = pf.estimate_mean(ps)
        gdet = _gramian_det(m, est, cfg.v)
        records = [SimTraceRecord(0, truth, est, pf.trace_position(ps), None, z, None, gdet)]
        for step in range(1, cfg.max_steps + 1):
            if _at_goal(cfg, est):
                break
            if cfg.planner == "straight":
                a = straight_action(est, pcfg)
            else:
                a, _ = plan(m, est, pcfg)
            u = pcfg.control(a)
            period = cfg.fast_measurement_period if (gdet is not None and gdet > threshold) \
                else cfg.measurement_period
            truth = step_noisy(truth, u, cfg.dt, cfg.noise, truth_rng)
            ps = pf.propagate(ps, u, cfg.dt, cfg.noise, filt_rng)
            z = None
            if step % period == 0:
                z = measure(m, truth, sigma_z, sensor_rng)
                ps = _pf_update(ps, m, z, cfg, filt_rng)
            est = pf.estimate_mean(ps)
            gdet = _gramian_det(m, est, cfg.v)
            records.append(SimTraceRecord(step, truth, est, pf.trace_position(ps), None, z, u, gdet))
    except MagNavError as exc:
        raise SimulationError(step, exc) from exc
    return records


def replay_observability(cfg: SimConfig, records, m: Optional[GridMap] = None) -> list[tuple[Pose, float]]:
    """Re-run the estimator on logged controls and measurements.

    Returns ``(estimate, trace_position)`` per record; these must equal the
    logged columns exactly.
    """
    m = cfg.build_map() if m is None else m
    filt_rng = _rngs(cfg.seed)[2]
    out = []
    ps = None
    for rec in records:
        if rec.control is None:
            ps = pf.init(cfg.start, cfg.p0, cfg.n_particles, filt_rng)
        else:
            ps = pf.propagate(ps, rec.control, cfg.dt, cfg.noise, filt_rng)
        if rec.measurement is not None:
            ps = _pf_update(ps, m, rec.measurement, cfg, filt_rng)
        out.append((pf.estimate_mean(ps), pf.trace_position(ps)))
    return out


def initial_belief(cfg: SimConfig, m: GridMap) -> bel.BeliefGrid:
    ox, oy, nx, ny = bel.grid_for_map(m, cfg.belief_resolution)
    return bel.gaussian_belief(ox, oy, cfg.belief_resolution, nx, ny, cfg.start,
                               (cfg.p0_std[0], cfg.p0_std[1]))


def _belief_estimate(b: bel.BeliefGrid) -> Pose:
    x, y = b.mean()
    return Pose(x, y, b.heading)


def _heading_var_after(cfg: SimConfig, var: float, u: ControlInput) -> float:
    return var + cfg.noise.motion_sigmas(u, cfg.dt)[1] ** 2


def _eer_kernel(cfg: SimConfig, base: float, heading_var: float) -> float:
    """Position kernel widened by the heading spread accumulated so far.

    The belief carries a single heading, so nothing ever corrects heading
    error; each step's lateral displacement error is about
    ``step_length * heading_sigma``.
    """
    step = cfg.v * cfg.dt
    return math.sqrt(base * base + step * step * heading_var)


def run_eer_sim(cfg: SimConfig, m: Optional[GridMap] = None) -> list[SimTraceRecord]:
    """Grid-belief closed loop driven by the one-step EER planner.

    Every step measures. The truth executes rotate-then-translate, matching
    the belief prediction. Heading variance implied by the commanded turns is
    accumulated from the start pose's heading spread and widens the motion
    kernel, see :func:`_eer_kernel`.

    Raises:
        ConfigError: the planner kind is not ``eer`` or start/goal lie off the map.
        SimulationError: any failure inside the loop, tagged with its step.
    """
    if cfg.planner != "eer":
        raise ConfigError("run_eer_sim needs planner 'eer'")
    m = cfg.build_map() if m is None else m
    _check_endpoints(cfg, m)
    ecfg = cfg.eer_planner()
    base = ecfg.motion_kernel_sigma
    truth_rng, sensor_rng, _ = _rngs(cfg.seed)
    sigma_z = cfg.noise.sigma_z

    step = 0
    try:
        truth = cfg.start
        var = cfg.p0_std[2] ** 2
        b = initial_belief(cfg, m)
        z = measure(m, truth, sigma_z, sensor_rng)
        b = bel.measurement_update(b, z, m, sigma_z)
        est = _belief_estimate(b)
        records = [SimTraceRecord(0, truth, est, b.trace_position(), bel.entropy(b), z)]
        for step in range(1, cfg.max_steps + 1):
            if _at_goal(cfg, est):
                break
            ecfg = dataclasses.replace(ecfg, motion_kernel_sigma=_eer_kernel(cfg, base, var))
            u = bel.choose_action(b, ecfg, m)
            truth = step_noisy(truth, u, cfg.dt, cfg.noise, truth_rng, turn_first=True)
            var = _heading_var_after(cfg, var, u)
            b = bel.predict(b, u, cfg.dt, _eer_kernel(cfg, base, var))
            z = measure(m, truth, sigma_z, sensor_rng)
            b = bel.measurement_update(b, z, m, sigma_z)
            est = _belief_estimate(b)
            records.append(SimTraceRecord(step, truth, est, b.trace_position(), bel.entropy(b), z, u))
    except MagNavError as exc:
        raise SimulationError(step, exc) from exc
    return records


def replay_eer(cfg: SimConfig, records, m: Optional[GridMap] = None) -> list[tuple[float, float, Pose]]:
    """Re-run the belief filter on logged controls and measurements.

    Returns ``(entropy_before_update, entropy_after_update, estimate)`` per
    record. For step 0 the first entry is the prior entropy; afterwards it is
    the entropy right after prediction.
    """
    m = cfg.build_map() if m is None else m
    base = cfg.eer_planner().motion_kernel_sigma
    out = []
    b = None
    var = cfg.p0_std[2] ** 2
    for rec in records:
        if rec.control is None:
            b = initial_belief(cfg, m)
        else:
            var = _heading_var_after(cfg, var, rec.control)
            b = bel.predict(b, rec.control, cfg.dt, _eer_kernel(cfg, base, var))
        h_pred = bel.entropy(b)
        b = bel.measurement_update(b, rec.measurement, m, cfg.noise.sigma_z)
        out.append((h_pred, bel.entropy(b), _belief_estimate(b)))
    return out


def run_sim(cfg: SimConfig, m: Optional[GridMap] = None) -> list[SimTraceRecord]:
    if cfg.planner == "eer":
        return run_eer_sim(cfg, m)
    return run_observability_sim(cfg, m)


def entropy_deltas(cfg: SimConfig, records, m: Optional[GridMap] = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-step entropy changes of a belief-grid run.

    Returns ``(measurement, prediction)``: ``measurement[k]`` is the change
    caused by the update at record ``k`` (negative when it sharpened the
    belief) and ``prediction[k]`` the change from the motion step that led to
    record ``k + 1``.
    """
    rp = replay_eer(cfg, records, m)
    meas = np.array([after - before for before, after, _ in rp])
    pred = np.array([rp[k][0] - rp[k - 1][1] for k in range(1, len(rp))])
    return meas, pred


def run_metric(cfg: SimConfig, records, m: Optional[GridMap] = None) -> float:
    """Time-averaged ``trace_pos`` for PF runs.

    For EER runs: the entropy removed by measurement updates, summed over
    the run. This is the realised counterpart of the expected reduction the
    planner optimises.
    """
    if cfg.planner == "eer":
        meas, _ = entropy_deltas(cfg, records, m)
        return float(-meas.sum())
    return float(np.mean([r.trace_position for r in records]))


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    metric: str
    values: tuple[float, ...]
    failures: tuple[str, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else math.nan

    @property
    def std(self) -> float:
        return float(np.std(self.values, ddof=1)) if len(self.values) > 1 else math.nan

    @property
    def flagged(self) -> bool:
        return self.ratio > FLAG_RATIO


def sweep_ratios(base: SimConfig, ratios, seeds) -> list[SweepRow]:
    """Run every (ratio, seed) cell; ``w_obs = ratio * w_goal``.

    A seed is shared across ratios (common random numbers), so the ratio-0
    column equals plain ``w_obs = 0`` runs with the same seeds. A failing
    cell is recorded in ``failures`` and the sweep carries on.
    """
    ratios, seeds = list(ratios), list(seeds)
    if not ratios:
        raise InvalidArgument("ratios must not be empty")
    if not seeds:
        raise InvalidArgument("seeds must not be empty")
    m = base.build_map()
    metric = "entropy_reduction" if base.planner == "eer" else "mean_trace_pos"
    rows = []
    for r in ratios:
        if not r >= 0:
            raise InvalidArgument(f"ratios must be >= 0, got {r}")
        vals, fails = [], []
        for s in seeds:
            cfg = base.with_ratio(r).replace(seed=s)
            try:
                vals.append(run_metric(cfg, run_sim(cfg, m), m))
            except MagNavError as exc:
                fails.append(f"seed {s}: {exc}")
        rows.append(SweepRow(float(r), metric, tuple(vals), tuple(fails)))
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def write_sweep(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("ratio", "metric", "n_ok", "n_failed", "mean", "std", "flag"))
        for r in rows:
            w.writerow((_fmt(r.ratio), r.metric, len(r.values), len(r.failures), _fmt(r.mean),
                        _fmt(r.std), "ratio_above_2" if r.flagged else ""))


def write_trace(records, path) -> None:
    """CSV trace, floats in shortest round-trip form, empty fields where not applicable."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in records:
            u = r.control
            w.writerow((r.step, _fmt(r.truth.x), _fmt(r.truth.y), _fmt(r.truth.theta),
                        _fmt(r.estimate.x), _fmt(r.estimate.y), _fmt(r.estimate.theta),
                        _fmt(r.trace_position), _fmt(r.entropy), _fmt(r.measurement),
                        _fmt(u.v if u else None), _fmt(u.omega if u else None), _fmt(r.gramian_det)))


def _opt(s):
    return float(s) if s != "" else None


def read_trace(path) -> list[SimTraceRecord]:
    """Parse a trace written by :func:`write_trace`.

    Raises:
        ValueError: wrong header or a malformed row (message carries the line number).
    """
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if tuple(header or ()) != TRACE_HEADER:
            raise ValueError(f"{path}:1: unexpected trace header")
        for row in rd:
            try:
                f = dict(zip(TRACE_HEADER, row, strict=True))
                v, om = _opt(f["v"]), _opt(f["omega"])
                out.append(SimTraceRecord(
                    int(f["step"]),
                    Pose(float(f["truth_x"]), float(f["truth_y"]), float(f["truth_theta"])),
                    Pose(float(f["est_x"]), float(f["est_y"]), float(f["est_theta"])),
                    float(f["trace_pos"]), _opt(f["entropy"]), _opt(f["meas_nT"]),
                    None if v is None else ControlInput(v, om), _opt(f["gramian_det"])))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{rd.line_num}: {exc}") from None
    return out

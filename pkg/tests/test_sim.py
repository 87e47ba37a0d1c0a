import math

import numpy as np
import pytest

from magnav import sim
from magnav.config import parse_config
from magnav.errors import ConfigError, InvalidArgument, OutOfBounds, SimulationError
from magnav.scenarios import lab_map

HEADING = math.degrees(math.atan2(-2.4, 3.6))


def lab_cfg(planner="observability", **extra):
    text = (f'seed = 0\nplanner = "{planner}"\nmap_scenario = "lab"\n'
            f'start = [-1.8, 1.2, {HEADING}]\ngoal = [1.8, -1.2]\n')
    text += "".join(f"{k} = {v}\n" for k, v in extra.items())
    return parse_config(text)


@pytest.fixture(scope="module")
def obs_run():
    cfg = lab_cfg(n_particles=300, max_steps=40)
    return cfg, sim.run_sim(cfg)


@pytest.fixture(scope="module")
def eer_run():
    cfg = lab_cfg("eer", dt=1.25, w_obs=0.5, max_steps=12)
    return cfg, sim.run_sim(cfg)


def test_obs_records_shape(obs_run):
    cfg, recs = obs_run
    assert [r.step for r in recs] == list(range(len(recs)))
    assert recs[0].control is None and all(r.control is not None for r in recs[1:])
    assert all(r.entropy is None for r in recs)
    assert all(r.measurement is not None for r in recs)
    assert all(r.trace_position > 0 for r in recs)


def test_obs_replay_matches_log_exactly(obs_run):
    cfg, recs = obs_run
    for rec, (est, tr) in zip(recs, sim.replay_observability(cfg, recs), strict=True):
        assert est == rec.estimate
        assert tr == rec.trace_position


def test_eer_replay_matches_log(eer_run):
    cfg, recs = eer_run
    rp = sim.replay_eer(cfg, recs)
    assert [after for _, after, _ in rp] == [r.entropy for r in recs]
    assert [est for _, _, est in rp] == [r.estimate for r in recs]


def test_entropy_deltas_and_metric(eer_run):
    cfg, recs = eer_run
    meas, pred = sim.entropy_deltas(cfg, recs)
    assert meas.shape == (len(recs),) and pred.shape == (len(recs) - 1,)
    # entropy after the last update = prior + every change along the way
    h0 = sim.replay_eer(cfg, recs)[0][0]
    assert h0 + meas.sum() + pred.sum() == pytest.approx(recs[-1].entropy, abs=1e-9)
    assert sim.run_metric(cfg, recs) == pytest.approx(-meas.sum())


def test_trace_round_trip(tmp_path, eer_run):
    _, recs = eer_run
    p = tmp_path / "t.csv"
    sim.write_trace(recs, p)
    assert sim.read_trace(p) == recs
    sim.write_trace(sim.read_trace(p), tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_bytes() == p.read_bytes()


def test_trace_header_and_empty_fields(tmp_path, obs_run):
    _, recs = obs_run
    p = tmp_path / "t.csv"
    sim.write_trace(recs[:2], p)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(sim.TRACE_HEADER)
    first = dict(zip(sim.TRACE_HEADER, lines[1].split(",")))
    assert first["v"] == first["omega"] == first["entropy"] == ""


def test_read_trace_rejects_garbage(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match=":1: unexpected trace header"):
        sim.read_trace(p)
    p.write_text(",".join(sim.TRACE_HEADER) + "\n0,x\n")
    with pytest.raises(ValueError, match=":2:"):
        sim.read_trace(p)


@pytest.mark.parametrize("planner", ["observability", "straight", "eer"])
def test_same_seed_same_bytes(tmp_path, planner):
    cfg = lab_cfg(planner, n_particles=200, max_steps=8)
    sim.write_trace(sim.run_sim(cfg), tmp_path / "a.csv")
    sim.write_trace(sim.run_sim(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    sim.write_trace(sim.run_sim(cfg.replace(seed=1)), tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_bytes() != (tmp_path / "a.csv").read_bytes()


def test_straight_planner_reaches_goal():
    recs = sim.run_sim(lab_cfg("straight", n_particles=500))
    end = recs[-1].estimate
    assert math.hypot(end.x - 1.8, end.y + 1.2) <= 0.25
    assert len(recs) - 1 < 200


def test_measurement_period_switching():
    cfg = lab_cfg(n_particles=200, max_steps=12, measurement_period=4, fast_measurement_period=1,
                  obs_rate_threshold=math.inf)
    recs = sim.run_sim(cfg)
    measured = [r.step for r in recs if r.measurement is not None]
    assert measured == [s for s in range(len(recs)) if s % 4 == 0]
    fast = sim.run_sim(cfg.replace(obs_rate_threshold=-1.0))
    assert all(r.measurement is not None for r in fast)


def test_default_rate_threshold_is_upper_quartile():
    cfg = lab_cfg()
    m = cfg.build_map()
    dets = sim.map_det_samples(m, cfg.v)
    assert sim.resolve_rate_threshold(cfg, m) == np.percentile(dets, 75)
    assert np.mean(dets > sim.resolve_rate_threshold(cfg, m)) == pytest.approx(0.25, abs=0.01)


def test_det_ref_default_and_override():
    cfg = lab_cfg()
    m = cfg.build_map()
    assert sim.resolve_det_ref(cfg, m) == 0.01 * sim.map_det_samples(m, cfg.v).max()
    assert sim.resolve_det_ref(cfg.replace(det_ref=7.0), m) == 7.0


def test_constant_map_eer_ignores_info_weight():
    text = ('seed = 4\nplanner = "eer"\nmap_sources = [[0, 0, 0, 1]]\nmap_baseline = 45000\n'
            'map_bounds = [-3, 3, -2.5, 2.5]\nstart = [-1.8, 1.2, -33.69]\ngoal = [1.8, -1.2]\n'
            'dt = 1.25\nmax_steps = 15\n')
    a = sim.run_sim(parse_config(text + "w_obs = 0\n"))
    b = sim.run_sim(parse_config(text + "w_obs = 2\n"))
    assert [r.control for r in a] == [r.control for r in b]


def test_planner_kind_checked():
    with pytest.raises(ConfigError):
        sim.run_eer_sim(lab_cfg("observability"))
    with pytest.raises(ConfigError):
        sim.run_observability_sim(lab_cfg("eer"))


def test_start_off_map_is_config_error():
    cfg = lab_cfg().replace(goal=(9.0, 0.0))
    with pytest.raises(ConfigError, match="outside map bounds"):
        sim.run_sim(cfg)


def test_runtime_failure_tagged_with_step(monkeypatch):
    real = sim.measure
    calls = []

    def flaky(m, pose, sigma_z, rng):
        calls.append(1)
        if len(calls) == 4:
            raise OutOfBounds("left the map")
        return real(m, pose, sigma_z, rng)

    monkeypatch.setattr(sim, "measure", flaky)
    with pytest.raises(SimulationError) as info:
        sim.run_sim(lab_cfg("straight", n_particles=100))
    assert info.value.step == 3
    assert isinstance(info.value.cause, OutOfBounds)


def test_sweep_uses_common_seeds():
    base = lab_cfg("observability", n_particles=150, max_steps=6)
    rows = sim.sweep_ratios(base, [0.0, 2.5], [0, 1])
    m = lab_map()
    direct = [sim.run_metric(base.with_ratio(0.0).replace(seed=s), sim.run_sim(base.with_ratio(0.0).replace(seed=s), m))
              for s in (0, 1)]
    assert rows[0].values == tuple(direct)
    assert rows[0].metric == "mean_trace_pos"
    assert not rows[0].flagged and rows[1].flagged


def test_sweep_records_failures(monkeypatch):
    real = sim.run_sim

    def run(cfg, m=None):
        if cfg.seed == 1:
            raise SimulationError(2, OutOfBounds("off"))
        return real(cfg, m)

    monkeypatch.setattr(sim, "run_sim", run)
    rows = sim.sweep_ratios(lab_cfg("straight", n_particles=100, max_steps=3), [1.0], [0, 1, 2])
    assert len(rows[0].values) == 2
    assert rows[0].failures == ("seed 1: step 2: OutOfBounds: off",)


def test_sweep_argument_checks():
    cfg = lab_cfg("straight")
    with pytest.raises(InvalidArgument):
        sim.sweep_ratios(cfg, [], [0])
    with pytest.raises(InvalidArgument):
        sim.sweep_ratios(cfg, [1.0], [])
    with pytest.raises(InvalidArgument):
        sim.sweep_ratios(cfg, [-1.0], [0])


def test_write_sweep(tmp_path):
    rows = [sim.SweepRow(0.0, "entropy_reduction", (1.0, 3.0), ()),
            sim.SweepRow(3.0, "entropy_reduction", (), ("seed 0: boom",))]
    p = tmp_path / "s.csv"
    sim.write_sweep(rows, p)
    assert p.read_text().splitlines() == [
        "ratio,metric,n_ok,n_failed,mean,std,flag",
        "0.0,entropy_reduction,2,0,2.0,1.4142135623730951,",
        "3.0,entropy_reduction,0,1,,,ratio_above_2",
    ]

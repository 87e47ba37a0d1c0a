import math
import pathlib

import numpy as np
import pytest

from magnav.config import load_config, load_map_spec, parse_config, parse_map_spec
from magnav.errors import ConfigError
from magnav.fieldmap import field_at, save_map
from magnav.scenarios import lab_map

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"

MINIMAL = 'seed = 3\nplanner = "observability"\nmap_scenario = "lab"\nstart = [-1.8, 1.2, 90]\ngoal = [1.8, -1.2]\n'


def test_minimal_config_defaults_and_degrees():
    cfg = parse_config(MINIMAL)
    assert cfg.seed == 3
    assert cfg.start.theta == pytest.approx(math.pi / 2)
    assert cfg.goal == (1.8, -1.2)
    assert cfg.horizon == 5 and cfg.n_z == 21
    assert cfg.noise.sigma_z == 100.0
    assert (cfg.weights.w_goal, cfg.weights.w_obs) == (1.0, 1.5)


def test_angle_lists_converted():
    cfg = parse_config(MINIMAL + "obs_actions_deg = [-30, 0, 30]\np0_std = [0.2, 0.3, 10]\n")
    assert cfg.obs_actions == pytest.approx(tuple(math.radians(a) for a in (-30, 0, 30)))
    assert cfg.p0_std == pytest.approx((0.2, 0.3, math.radians(10)))


def test_unknown_key_reports_line():
    text = MINIMAL + "goall = [1, 2]\n"
    with pytest.raises(ConfigError, match=r"cfg\.toml:6: unknown key 'goall'"):
        parse_config(text, "cfg.toml")


@pytest.mark.parametrize("key", ["seed", "planner", "start", "goal"])
def test_missing_required_key(key):
    text = "\n".join(line for line in MINIMAL.splitlines() if not line.startswith(key))
    with pytest.raises(ConfigError, match=f"missing required key '{key}'"):
        parse_config(text)


@pytest.mark.parametrize("extra, pattern", [
    ('horizon = 2.5\n', "horizon: expected an integer"),
    ('w_obs = "big"\n', "w_obs: expected a number"),
    ('include_terminal = 1\n', "expected true or false"),
    ('n_z = true\n', "expected an integer"),
])
def test_type_errors(extra, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(MINIMAL + extra)


def test_bad_start_shape():
    with pytest.raises(ConfigError, match="list of 3 numbers"):
        parse_config(MINIMAL.replace("[-1.8, 1.2, 90]", "[1, 2]"))


def test_unknown_planner_and_two_map_sources():
    with pytest.raises(ConfigError, match="planner must be one of"):
        parse_config(MINIMAL.replace('"observability"', '"astar"'))
    with pytest.raises(ConfigError, match="exactly one of"):
        parse_config(MINIMAL + 'map_file = "x.magmap"\n')


def test_toml_syntax_error():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "horizon = \n")


def test_map_file_relative_to_config(tmp_path):
    save_map(lab_map(), tmp_path / "lab.magmap")
    text = MINIMAL.replace('map_scenario = "lab"', 'map_file = "lab.magmap"')
    (tmp_path / "c.toml").write_text(text)
    cfg = load_config(tmp_path / "c.toml")
    assert np.array_equal(cfg.build_map().values, lab_map().values)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "nope.toml")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_bundled_configs_load(name):
    cfg = load_config(CONFIGS / name)
    cfg.build_map()


def test_with_ratio_scales_goal_weight():
    cfg = parse_config(MINIMAL + "w_goal = 2.0\n").with_ratio(1.5)
    assert (cfg.weights.w_goal, cfg.weights.w_obs) == (2.0, 3.0)


def test_map_spec_sources():
    m = parse_map_spec("sources = [[0, 0, 1000, 1]]\nbounds = [-2, 2, -1, 1]\nresolution = 0.5\n")
    assert (m.nx, m.ny) == (9, 5)
    assert field_at(m, 0.0, 0.0) == pytest.approx(1000.0)


def test_map_spec_scenario_with_heading():
    m = parse_map_spec('scenario = "lab"\nheading_amp = 10\nheading_phase_deg = 90\n')
    assert np.array_equal(m.values, lab_map().values)
    assert m.heading_amp == 10.0
    assert m.heading_phase == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("text, pattern", [
    ("bounds = [-1, 1, -1, 1]\n", "missing required key 'sources'"),
    ('scenario = "lab"\nresolution = 0.1\n', "cannot be combined"),
    ('scenario = "moon"\n', "unknown map scenario"),
    ("sources = [[0, 0, 1]]\nbounds = [-1, 1, -1, 1]\n", r":1: sources: expected a list of 4"),
    ("\nsource = []\n", r":2: unknown key 'source'"),
])
def test_map_spec_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_map_spec(text)


@pytest.mark.parametrize("name", sorted(p.name for p in (CONFIGS / "maps").glob("*.toml")))
def test_bundled_map_specs(name):
    assert load_map_spec(CONFIGS / "maps" / name).values.size > 0

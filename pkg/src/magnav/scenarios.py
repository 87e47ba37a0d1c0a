"""Bundled synthetic scenarios.

``lab`` is a SYNTHETIC stand-in for an indoor survey: six Gaussian
anomalies over a 6 m x 5 m floor sampled on a 25 cm grid. It is not measured
data. The straight line from ``LAB_START`` to ``LAB_GOAL`` crosses a weak
corridor with stronger anomalies on either side, which is the situation where
trading path length for information can pay off.

``single_gaussian`` is one symmetric source at the origin.
"""
from __future__ import annotations

from .errors import ConfigError
from .fieldmap import GaussianSource, GridMap, generate_gaussian_map

LAB_BOUNDS = (-3.0, 3.0, -2.5, 2.5)
LAB_RESOLUTION = 0.25
LAB_SOURCES = (
    GaussianSource(-2.4, 0.9, 2000.0, 0.7),
    GaussianSource(-1.2, -0.7, 2500.0, 0.6),
    GaussianSource(0.6, -1.9, -2500.0, 0.6),
    GaussianSource(1.0, 1.4, 1000.0, 0.8),
    GaussianSource(-0.5, 2.2, -1200.0, 0.7),
    GaussianSource(2.0, -0.4, -2000.0, 0.7),
)
LAB_START = (-1.8, 1.2)
LAB_GOAL = (1.8, -1.2)

SINGLE_BOUNDS = (-4.0, 4.0, -4.0, 4.0)
SINGLE_RESOLUTION = 0.1
SINGLE_SOURCE = GaussianSource(0.0, 0.0, 2000.0, 1.0)


def lab_map() -> GridMap:
    return generate_gaussian_map(LAB_SOURCES, LAB_BOUNDS, LAB_RESOLUTION, baseline=0.0)


def single_gaussian_map() -> GridMap:
    return generate_gaussian_map([SINGLE_SOURCE], SINGLE_BOUNDS, SINGLE_RESOLUTION, baseline=0.0)


SCENARIOS = {"lab": lab_map, "single_gaussian": single_gaussian_map}


def scenario_map(name: str) -> GridMap:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ConfigError(f"unknown map scenario {name!r}; choose from {sorted(SCENARIOS)}") from None

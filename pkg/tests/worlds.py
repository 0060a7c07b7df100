"""Synthetic data for the pipeline tests: tiny planar networks and a linear energy world."""

from __future__ import annotations

import numpy as np

from fleetopt.geo import LocalProjection
from fleetopt.pipeline.network import Node, RoadNetwork, Way
from fleetopt.pipeline.samples import NUMERIC_FEATURES

ORIGIN = (35.0, -85.0)
PROJ = LocalProjection(*ORIGIN)


def latlon(x, y):
    lat, lon = PROJ.inverse(x, y)
    return float(lat), float(lon)


def planar_network(ways: dict[str, tuple[list[tuple[float, float]], str]], elevation=None) -> RoadNetwork:
    """Network from planar polylines in meters; ``elevation`` maps (x, y) to meters."""
    nodes, out = {}, []
    for wid, (coords, cls) in sorted(ways.items()):
        ids = []
        for x, y in coords:
            nid = f"{x:g}_{y:g}"
            if nid not in nodes:
                lat, lon = latlon(x, y)
                nodes[nid] = Node(nid, lat, lon, None if elevation is None else elevation(x, y))
            ids.append(nid)
        out.append(Way(wid, tuple(ids), cls))
    return RoadNetwork(list(nodes.values()), out)


# true per-segment model of the linear world
TRUE_COEF = {
    "distance_m": 0.0016,
    "elevation_delta_m": 0.011,
    "temp_c": -0.004,
    "humidity_pct": 0.001,
    "visibility_km": -0.002,
    "precip_mm": 0.03,
    "wind_ms": 0.006,
    "speed_ratio": -0.4,
}
TRUE_INTERCEPT = 0.5
CLASS_OFFSET = {"primary": 0.0, "residential": 0.12, "secondary": 0.05}


def world_rows(rng: np.random.Generator, n: int, noise_kwh: float = 0.25) -> list[dict]:
    """Segment rows whose energy is linear in the features plus Gaussian noise."""
    rows = []
    classes = sorted(CLASS_OFFSET)
    for _ in range(n):
        r = {
            "distance_m": rng.uniform(200.0, 1500.0),
            "elevation_delta_m": rng.normal(0.0, 6.0),
            "temp_c": rng.uniform(-5.0, 35.0),
            "humidity_pct": rng.uniform(20.0, 95.0),
            "visibility_km": rng.uniform(1.0, 16.0),
            "precip_mm": rng.exponential(0.5),
            "wind_ms": rng.uniform(0.0, 12.0),
            "speed_ratio": rng.uniform(0.3, 1.0),
            "road_class": classes[int(rng.integers(len(classes)))],
        }
        r["energy_kwh"] = true_energy(r) + rng.normal(0.0, noise_kwh)
        rows.append(r)
    return rows


def true_energy(row: dict) -> float:
    return TRUE_INTERCEPT + sum(TRUE_COEF[f] * row[f] for f in NUMERIC_FEATURES) + CLASS_OFFSET[row["road_class"]]

"""Road network: nodes, ways and the per-way segments the matcher works on."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import shapely

from ..errors import DegenerateNetwork, PipelineError
from ..geo import LocalProjection

BUS_LEGAL_CLASSES = frozenset(
    {"motorway", "trunk", "primary", "secondary", "tertiary", "residential", "unclassified", "busway", "service"}
)


@dataclass(frozen=True)
class Node:
    id: str
    lat: float
    lon: float
    elevation_m: float | None = None


@dataclass(frozen=True)
class Way:
    id: str
    nodes: tuple[str, ...]
    highway: str


@dataclass(frozen=True)
class Segment:
    """One way as a planar polyline in the network's local projection."""

    id: str
    highway: str
    line: shapely.LineString
    elevations: tuple[float, ...] | None  # per vertex, None when any is unknown
    cumulative_m: tuple[float, ...]  # distance along the line at each vertex

    @property
    def length_m(self) -> float:
        return self.cumulative_m[-1]

    def elevation_at(self, dist_m: float) -> float | None:
        if self.elevations is None:
            return None
        return float(np.interp(dist_m, self.cumulative_m, self.elevations))


class RoadNetwork:
    def __init__(self, nodes: list[Node], ways: list[Way]):
        self.nodes = {n.id: n for n in nodes}
        if len(self.nodes) != len(nodes):
            raise PipelineError("duplicate node id")
        self.ways = sorted(ways, key=lambda w: w.id)
        if len({w.id for w in ways}) != len(ways):
            raise PipelineError("duplicate way id")
        for w in self.ways:
            if len(w.nodes) < 2:
                raise PipelineError(f"way {w.id!r} needs at least two nodes")
            for nid in w.nodes:
                if nid not in self.nodes:
                    raise PipelineError(f"way {w.id!r} references unknown node {nid!r}")
        if not self.nodes:
            raise DegenerateNetwork("network has no nodes")
        lats = [n.lat for n in nodes]
        lons = [n.lon for n in nodes]
        self.projection = LocalProjection(float(np.mean(lats)), float(np.mean(lons)))

    @cached_property
    def segments(self) -> dict[str, Segment]:
        out = {}
        for w in self.ways:
            pts = [self.nodes[n] for n in w.nodes]
            x, y = self.projection.forward([p.lat for p in pts], [p.lon for p in pts])
            coords = np.column_stack([x, y])
            steps = np.hypot(*np.diff(coords, axis=0).T)
            cum = tuple(float(c) for c in np.concatenate([[0.0], np.cumsum(steps)]))
            elev = [p.elevation_m for p in pts]
            out[w.id] = Segment(
                w.id,
                w.highway,
                shapely.LineString(coords),
                None if any(e is None for e in elev) else tuple(float(e) for e in elev),
                cum,
            )
        return out

    @property
    def has_elevation(self) -> bool:
        return all(n.elevation_m is not None for n in self.nodes.values())

    def to_dict(self) -> dict:
        nodes = []
        for n in sorted(self.nodes.values(), key=lambda n: n.id):
            d = {"id": n.id, "lat": n.lat, "lon": n.lon}
            if n.elevation_m is not None:
                d["elevation_m"] = n.elevation_m
            nodes.append(d)
        ways = [{"id": w.id, "nodes": list(w.nodes), "highway": w.highway} for w in self.ways]
        return {"nodes": nodes, "ways": ways}

    @classmethod
    def from_dict(cls, data: dict) -> "RoadNetwork":
        try:
            nodes = [Node(str(n["id"]), float(n["lat"]), float(n["lon"]),
                          None if n.get("elevation_m") is None else float(n["elevation_m"]))
                     for n in data["nodes"]]
            ways = [Way(str(w["id"]), tuple(str(x) for x in w["nodes"]), str(w.get("highway", "unclassified")))
                    for w in data["ways"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise PipelineError(f"malformed network JSON: {exc}") from exc
        return cls(nodes, ways)


def load_network(path: str | Path) -> RoadNetwork:
    return RoadNetwork.from_dict(json.loads(Path(path).read_text()))


def save_network(network: RoadNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network.to_dict(), indent=1) + "\n")


def grid_network(
    n_streets: int = 25,
    spacing_m: float = 250.0,
    seed: int = 0,
    origin: tuple[float, float] = (35.0456, -85.3097),
) -> RoadNetwork:
    """A square street grid: ``n_streets`` east-west and as many north-south ways.

    Every way runs the full width of the grid through all its intersections,
    so two ways share exactly one node. Elevations follow a gentle random
    surface.
    """
    rng = np.random.default_rng(seed)
    proj = LocalProjection(*origin)
    classes = ["primary", "secondary", "tertiary", "residential"]
    a, b, c = rng.normal(0.0, 0.004, size=3)
    nodes = []
    for i in range(n_streets):
        for j in range(n_streets):
            x, y = j * spacing_m, i * spacing_m
            lat, lon = proj.inverse(x, y)
            elev = 200.0 + a * x + b * y + 8.0 * np.sin(c * 100.0 + x / 700.0) * np.cos(y / 900.0)
            nodes.append(Node(f"n{i:02d}_{j:02d}", round(float(lat), 7), round(float(lon), 7), round(float(elev), 2)))
    ways = []
    for i in range(n_streets):
        cls = classes[int(rng.integers(len(classes)))]
        ways.append(Way(f"h{i:02d}", tuple(f"n{i:02d}_{j:02d}" for j in range(n_streets)), cls))
    for j in range(n_streets):
        cls = classes[int(rng.integers(len(classes)))]
        ways.append(Way(f"v{j:02d}", tuple(f"n{i:02d}_{j:02d}" for i in range(n_streets)), cls))
    return RoadNetwork(nodes, ways)

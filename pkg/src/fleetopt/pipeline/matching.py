"""Heuristic map matching with an R-tree, and its synthetic-noise evaluation.

A location's candidates are the bus-legal segments within ``radius_m``. Each
candidate scores the number of the ``window`` preceding and ``window``
following locations that also lie within ``radius_m`` of it; the best score
wins, then the smaller distance, then the smaller segment id. "Nearby" reuses
the candidate radius.
"""

from __future__ import annotations

import weakref
from typing import Sequence

import numpy as np
import shapely

from ..errors import DegenerateNetwork
from .network import BUS_LEGAL_CLASSES, RoadNetwork

DEFAULT_RADIUS_M = 100.0
DEFAULT_WINDOW = 10


class SegmentIndex:
    """STRtree over the bus-legal segments of one network."""

    def __init__(self, network: RoadNetwork, classes=BUS_LEGAL_CLASSES):
        self.network = network
        segs = [s for s in network.segments.values() if s.highway in classes]
        self.ids = [s.id for s in segs]
        self.geoms = np.array([s.line for s in segs], dtype=object)
        self.tree = shapely.STRtree(self.geoms)

    def match(self, locations: Sequence[tuple[float, float]], radius_m: float, window: int) -> list[str | None]:
        if radius_m <= 0:
            raise ValueError("radius_m must be positive")
        if window < 0:
            raise ValueError("window must be non-negative")
        n = len(locations)
        if n == 0:
            return []
        lat = np.array([p[0] for p in locations], dtype=float)
        lon = np.array([p[1] for p in locations], dtype=float)
        x, y = self.network.projection.forward(lat, lon)
        pts = shapely.points(x, y)
        if not self.ids:
            return [None] * n
        pi, gi = self.tree.query(pts, predicate="dwithin", distance=radius_m)
        near: dict[int, list[int]] = {}
        for p, g in zip(pi.tolist(), gi.tolist()):
            near.setdefault(p, []).append(g)
        within = {(p, g) for p, g in zip(pi.tolist(), gi.tolist())}
        out: list[str | None] = []
        for i in range(n):
            cands = near.get(i)
            if not cands:
                out.append(None)
                continue
            lo, hi = max(0, i - window), min(n, i + window + 1)
            best = None
            for g in cands:
                score = sum(1 for j in range(lo, hi) if j != i and (j, g) in within)
                key = (-score, float(shapely.distance(self.geoms[g], pts[i])), self.ids[g])
                if best is None or key < best:
                    best = key
            out.append(best[2])
        return out


_INDEX_CACHE: "weakref.WeakKeyDictionary[RoadNetwork, dict]" = weakref.WeakKeyDictionary()


def segment_index(network: RoadNetwork, classes=BUS_LEGAL_CLASSES) -> SegmentIndex:
    per_net = _INDEX_CACHE.setdefault(network, {})
    key = frozenset(classes)
    if key not in per_net:
        per_net[key] = SegmentIndex(network, classes)
    return per_net[key]


def map_match(
    network: RoadNetwork,
    locations: Sequence[tuple[float, float]],
    radius_m: float = DEFAULT_RADIUS_M,
    window: int = DEFAULT_WINDOW,
    classes=BUS_LEGAL_CLASSES,
) -> list[str | None]:
    """Segment id for each (lat, lon) location, or None when nothing is in range."""
    return segment_index(network, classes).match(locations, radius_m, window)


# ------------------------------------------------------------- evaluation


def _adjacency(network: RoadNetwork, classes) -> dict[str, list[tuple[str, int]]]:
    """Node id -> every (way id, position) where a legal way passes the node."""
    adj: dict[str, list[tuple[str, int]]] = {}
    for w in network.ways:
        if w.highway in classes:
            for k, nid in enumerate(w.nodes):
                adj.setdefault(nid, []).append((w.id, k))
    return adj


def _check_connected(network: RoadNetwork, adj) -> None:
    legal = {w for entries in adj.values() for w, _ in entries}
    if len(legal) < 2:
        raise DegenerateNetwork("need at least two bus-legal segments")
    if not any(len({w for w, _ in entries}) > 1 for entries in adj.values()):
        raise DegenerateNetwork("no two bus-legal segments share a node")


def random_route(
    network: RoadNetwork,
    n_points: int,
    spacing_m: float,
    rng: np.random.Generator,
    classes=BUS_LEGAL_CLASSES,
    turn_prob: float = 0.3,
) -> tuple[np.ndarray, list[str]]:
    """Equally spaced planar points along a random walk, with the way under each point."""
    adj = _adjacency(network, classes)
    _check_connected(network, adj)
    ways = {w.id: w for w in network.ways}
    xy = {}
    for nid in adj:
        x, y = network.projection.forward(network.nodes[nid].lat, network.nodes[nid].lon)
        xy[nid] = (float(x), float(y))

    legal = sorted({w for entries in adj.values() for w, _ in entries})
    way = ways[legal[int(rng.integers(len(legal)))]]
    pos = int(rng.integers(len(way.nodes)))
    step = 1 if pos == 0 else -1 if pos == len(way.nodes) - 1 else int(rng.choice([-1, 1]))
    need = (n_points - 1) * spacing_m + 1e-9
    edges: list[tuple[tuple[float, float], tuple[float, float], str]] = []
    total = 0.0
    while total < need:
        nxt = pos + step
        a, b = xy[way.nodes[pos]], xy[way.nodes[nxt]]
        edges.append((a, b, way.id))
        total += float(np.hypot(b[0] - a[0], b[1] - a[1]))
        pos = nxt
        node = way.nodes[pos]
        others = [(w, k) for w, k in adj[node] if w != way.id]
        at_end = pos + step < 0 or pos + step >= len(way.nodes)
        if others and (at_end or rng.random() < turn_prob):
            w, k = others[int(rng.integers(len(others)))]
            way, pos = ways[w], k
            dirs = [d for d in (-1, 1) if 0 <= k + d < len(way.nodes)]
            step = int(rng.choice(dirs))
        elif at_end:
            step = -step

    pts = np.empty((n_points, 2))
    truth = []
    k, offset = 0, 0.0  # edge index and distance at its start
    for i in range(n_points):
        d = i * spacing_m
        while True:
            a, b, wid = edges[k]
            length = float(np.hypot(b[0] - a[0], b[1] - a[1]))
            if d < offset + length or k == len(edges) - 1:
                break
            offset += length
            k += 1
        t = (d - offset) / length if length else 0.0
        pts[i] = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        truth.append(wid)
    return pts, truth


def evaluate_matching(
    network: RoadNetwork,
    routes: int = 10,
    points_per_route: int = 200,
    sigmas_m: Sequence[float] = (1.1, 20.0, 60.0, 100.0, 140.0),
    seed: int = 0,
    *,
    spacing_m: float = 17.0,
    radius_m: float = DEFAULT_RADIUS_M,
    window: int = DEFAULT_WINDOW,
    classes=BUS_LEGAL_CLASSES,
) -> dict[float, float]:
    """Fraction of noisy on-road points matched to the segment that generated them.

    The same routes are reused for every sigma; only the noise changes.
    """
    rng = np.random.default_rng(seed)
    walks = [random_route(network, points_per_route, spacing_m, rng, classes) for _ in range(routes)]
    index = segment_index(network, classes)
    out = {}
    for k, sigma in enumerate(sigmas_m):
        noise_rng = np.random.default_rng([seed, k])
        correct = total = 0
        for pts, truth in walks:
            noisy = pts + noise_rng.normal(0.0, sigma, size=pts.shape) if sigma > 0 else pts
            lat, lon = network.projection.inverse(noisy[:, 0], noisy[:, 1])
            got = index.match(list(zip(lat.tolist(), lon.tolist())), radius_m, window)
            correct += sum(g == t for g, t in zip(got, truth))
            total += len(truth)
        out[float(sigma)] = correct / total
    return out

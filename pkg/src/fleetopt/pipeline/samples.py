"""Per-segment energy samples cut from a matched, labelled trace."""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import shapely

from ..errors import FeatureJoinGap, PipelineError
from .network import RoadNetwork

WEATHER_COLUMNS = ("temp_c", "humidity_pct", "visibility_km", "precip_mm", "wind_ms")
DEFAULT_JOIN_HORIZON_S = 3600.0


@dataclass(frozen=True)
class EnergySample:
    segment_id: str
    start_ts: float
    end_ts: float
    distance_m: float
    elevation_delta_m: float
    road_class: str
    temp_c: float
    humidity_pct: float
    visibility_km: float
    precip_mm: float
    wind_ms: float
    speed_ratio: float
    energy_kwh: float


SAMPLE_COLUMNS = [f.name for f in fields(EnergySample)]
NUMERIC_FEATURES = (
    "distance_m", "elevation_delta_m", "temp_c", "humidity_pct", "visibility_km", "precip_mm", "wind_ms",
    "speed_ratio",
)


class FeatureTable:
    """Timestamped feature rows, optionally keyed by segment, joined by nearest time."""

    def __init__(self, rows: Sequence[dict], columns: Sequence[str], name: str):
        self.columns = tuple(columns)
        self.name = name
        self._by_key: dict[str | None, tuple[list[float], list[dict]]] = {}
        for row in sorted(rows, key=lambda r: float(r["ts_s"])):
            key = row.get("segment_id") or None
            ts, vals = self._by_key.setdefault(key, ([], []))
            ts.append(float(row["ts_s"]))
            vals.append({c: float(row[c]) for c in self.columns})

    @classmethod
    def read_csv(cls, path: str | Path, columns: Sequence[str], name: str) -> "FeatureTable":
        with open(path, newline="") as fh:
            return cls(list(csv.DictReader(fh)), columns, name)

    def lookup(self, ts: float, horizon_s: float, segment_id: str | None = None) -> dict[str, float]:
        key = segment_id if segment_id in self._by_key else None
        if key not in self._by_key:
            raise FeatureJoinGap(f"no {self.name} rows for segment {segment_id!r}")
        times, vals = self._by_key[key]
        k = bisect.bisect_left(times, ts)
        best = min((j for j in (k - 1, k) if 0 <= j < len(times)), key=lambda j: (abs(times[j] - ts), j))
        if abs(times[best] - ts) > horizon_s:
            raise FeatureJoinGap(f"nearest {self.name} row is {abs(times[best] - ts):.0f} s from {ts:.0f}")
        return vals[best]


def weather_table(rows: Sequence[dict]) -> FeatureTable:
    return FeatureTable(rows, WEATHER_COLUMNS, "weather")


def traffic_table(rows: Sequence[dict]) -> FeatureTable:
    return FeatureTable(rows, ("speed_ratio",), "traffic")


def runs(matched: Sequence[str | None]) -> list[tuple[int, int, str]]:
    """Maximal runs (first, last, segment) of equal matched ids, unmatched and singletons dropped."""
    out = []
    i = 0
    while i < len(matched):
        j = i
        while j + 1 < len(matched) and matched[j + 1] == matched[i]:
            j += 1
        if matched[i] is not None and j > i:
            out.append((i, j, matched[i]))
        i = j + 1
    return out


def make_samples(
    network: RoadNetwork,
    ts: Sequence[float],
    locations: Sequence[tuple[float, float]],
    matched: Sequence[str | None],
    energies: Sequence[float | None],
    weather: FeatureTable,
    traffic: FeatureTable,
    horizon_s: float = DEFAULT_JOIN_HORIZON_S,
) -> list[EnergySample]:
    """One sample per maximal run of points matched to the same segment.

    ``energies[i]`` is the label of the interval ending at point i (None when
    missing). A run over points i..j collects the labels of i+1..j; its
    distance is measured along the segment between the projections of its end
    points. Features are joined at the run's midpoint time.
    """
    n = len(ts)
    if not (len(locations) == len(matched) == len(energies) == n):
        raise PipelineError("trace, matches and labels must have equal length")
    segs = network.segments
    proj = network.projection
    out = []
    for i, j, sid in runs(matched):
        seg = segs[sid]
        xs, ys = proj.forward([locations[i][0], locations[j][0]], [locations[i][1], locations[j][1]])
        d0 = float(shapely.line_locate_point(seg.line, shapely.Point(xs[0], ys[0])))
        d1 = float(shapely.line_locate_point(seg.line, shapely.Point(xs[1], ys[1])))
        e0, e1 = seg.elevation_at(d0), seg.elevation_at(d1)
        mid = (ts[i] + ts[j]) / 2.0
        w = weather.lookup(mid, horizon_s)
        t = traffic.lookup(mid, horizon_s, sid)
        out.append(
            EnergySample(
                sid, float(ts[i]), float(ts[j]), abs(d1 - d0),
                0.0 if e0 is None else e1 - e0,
                seg.highway,
                w["temp_c"], w["humidity_pct"], w["visibility_km"], w["precip_mm"], w["wind_ms"],
                t["speed_ratio"],
                float(sum(e for e in energies[i + 1 : j + 1] if e is not None)),
            )
        )
    return out


def write_samples(samples: Sequence[EnergySample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for s in samples:
            row = []
            for c in SAMPLE_COLUMNS:
                v = getattr(s, c)
                row.append(f"{v:.6f}" if isinstance(v, float) else v)
            w.writerow(row)


def read_samples(path: str | Path) -> list[EnergySample]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for f in fields(EnergySample):
                kw[f.name] = row[f.name] if f.name in ("segment_id", "road_class") else float(row[f.name])
            out.append(EnergySample(**kw))
    return out

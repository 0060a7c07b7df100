"""Telemetry traces: CSV I/O, point filtering and per-interval energy labels."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import shapely

from ..errors import EmptyAfterFilter, NonMonotonicTimestamps
from ..instance import ELECTRIC, KWH_PER_GALLON, LIQUID_FUEL

JOULES_PER_KWH = 3.6e6


@dataclass(frozen=True)
class TelemetryPoint:
    ts_s: float
    lat: float
    lon: float
    current_a: float | None = None
    voltage_v: float | None = None
    soc_pct: float | None = None
    cable: int = 0
    fuel_gal: float | None = None


TRACE_COLUMNS = [f.name for f in fields(TelemetryPoint)]


def read_trace(path: str | Path) -> list[TelemetryPoint]:
    points = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def num(key):
                val = (row.get(key) or "").strip()
                return float(val) if val else None

            cable = num("cable")
            points.append(
                TelemetryPoint(
                    num("ts_s"), num("lat"), num("lon"), num("current_a"), num("voltage_v"),
                    num("soc_pct"), int(cable) if cable is not None else 0, num("fuel_gal"),
                )
            )
    return points


def write_trace(points: Sequence[TelemetryPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for p in points:
            w.writerow(["" if getattr(p, c) is None else getattr(p, c) for c in TRACE_COLUMNS])


def _in_garages(points: Sequence[TelemetryPoint], garages) -> np.ndarray:
    """Boolean mask of points inside any garage polygon given as (lat, lon) rings."""
    inside = np.zeros(len(points), dtype=bool)
    if not garages:
        return inside
    lat = np.array([p.lat for p in points])
    lon = np.array([p.lon for p in points])
    for ring in garages:
        poly = shapely.Polygon([(lo, la) for la, lo in ring])
        inside |= shapely.contains_xy(poly, lon, lat)
    return inside


def clean_and_label(
    trace: Sequence[TelemetryPoint],
    kind: str,
    garages: Sequence[Sequence[tuple[float, float]]] = (),
    kwh_per_gallon: float = KWH_PER_GALLON,
) -> list[tuple[int, float]]:
    """Energy used between each kept point and its predecessor.

    Points with the charging cable plugged in or inside a garage polygon are
    dropped. A label for point i covers the interval (i-1, i) of the raw trace
    and is kept only when both ends survive the filter. Electric labels are
    current times voltage times elapsed time; liquid-fuel labels are the drop
    in tank level converted to kWh, with refuelling intervals skipped.
    """
    if kind not in (ELECTRIC, LIQUID_FUEL):
        raise ValueError(f"unknown vehicle kind {kind!r}")
    if not trace:
        raise EmptyAfterFilter("trace is empty")
    ts = [p.ts_s for p in trace]
    for i in range(1, len(ts)):
        if not ts[i] > ts[i - 1]:
            raise NonMonotonicTimestamps(f"timestamp {ts[i]} at point {i} does not increase")
    keep = ~_in_garages(trace, garages)
    keep &= np.array([p.cable != 1 for p in trace])
    if not keep.any():
        raise EmptyAfterFilter("every point was filtered out")

    labels = []
    for i in range(1, len(trace)):
        if not (keep[i] and keep[i - 1]):
            continue
        a, b = trace[i - 1], trace[i]
        if kind == ELECTRIC:
            if b.current_a is None or b.voltage_v is None:
                continue
            labels.append((i, b.current_a * b.voltage_v * (b.ts_s - a.ts_s) / JOULES_PER_KWH))
        else:
            if a.fuel_gal is None or b.fuel_gal is None:
                continue
            used = a.fuel_gal - b.fuel_gal
            if used >= 0:
                labels.append((i, used * kwh_per_gallon))
    return labels


def labels_by_point(labels: list[tuple[int, float]], n_points: int) -> list[float | None]:
    out: list[float | None] = [None] * n_points
    for i, e in labels:
        out[i] = e
    return out


def synthetic_discharge_trace(
    seed: int,
    capacity_kwh: float = 300.0,
    duration_s: int = 4 * 3600,
    period_s: float = 1.0,
    start: tuple[float, float] = (35.0456, -85.3097),
) -> list[TelemetryPoint]:
    """An electric bus trace whose state of charge follows the power drawn.

    Power alternates between cruising, accelerating and regenerative braking;
    the current is what the battery sees over each interval, so integrating
    current times voltage reproduces the state-of-charge drop up to the
    rounding of the reported percentage.
    """
    rng = np.random.default_rng(seed)
    n = int(duration_s / period_s) + 1
    ts = np.arange(n) * period_s
    # smooth random power profile in kW, occasionally negative (regen)
    knots = rng.normal(60.0, 45.0, size=n // 30 + 2)
    power_kw = np.interp(ts, np.arange(len(knots)) * 30.0 * period_s, knots)
    voltage = 620.0 + rng.normal(0.0, 4.0, size=n)
    current = power_kw * 1000.0 / voltage
    used = np.concatenate([[0.0], np.cumsum(current[1:] * voltage[1:] * period_s) / JOULES_PER_KWH])
    soc0 = 95.0
    soc = soc0 - used / capacity_kwh * 100.0
    lat0, lon0 = start
    heading = rng.uniform(0, 2 * math.pi)
    lat, lon = np.empty(n), np.empty(n)
    y = x = 0.0
    for i in range(n):
        heading += rng.normal(0.0, 0.02)
        x += math.cos(heading) * 8.0 * period_s
        y += math.sin(heading) * 8.0 * period_s
        lat[i] = lat0 + y / 111_195.0
        lon[i] = lon0 + x / (111_195.0 * math.cos(math.radians(lat0)))
    return [
        TelemetryPoint(
            float(ts[i]), round(float(lat[i]), 7), round(float(lon[i]), 7),
            round(float(current[i]), 4), round(float(voltage[i]), 3), round(float(soc[i]), 2), 0, None,
        )
        for i in range(n)
    ]


def soc_energy_kwh(trace: Sequence[TelemetryPoint], capacity_kwh: float) -> float:
    """Energy implied by the state-of-charge drop from first to last point."""
    return (trace[0].soc_pct - trace[-1].soc_pct) / 100.0 * capacity_kwh

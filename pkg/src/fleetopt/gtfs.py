"""Build an Instance from a static GTFS subset (trips, stop_times, stops).

Each GTFS trip becomes one transit trip from its first to its last stop.
Locations are the trip terminals plus a depot at the centroid of all stops,
where the charging poles sit unless the fleet file says otherwise.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping

from .errors import InstanceParseError
from .geo import haversine_m
from .instance import (
    ELECTRIC,
    ChargingPole,
    CostParams,
    DeadheadEntry,
    Instance,
    Location,
    SlotGrid,
    TransitTrip,
    Vehicle,
    VehicleModelSpec,
)
from .pipeline.regression import LinearModel, predict_trip_energy, segment_row

DEADHEAD_SPEED_KMH = 25.0
# per-kind fallback consumption when no calibrated model is given
DEFAULT_KWH_PER_KM = {"electric": 1.69, "liquid_fuel": 6.41}

DEFAULT_FLEET = {
    "models": [
        {"id": "EV", "kind": "electric", "battery_capacity_kwh": 100.0},
        {"id": "ICEV", "kind": "liquid_fuel", "battery_capacity_kwh": 0.0},
    ],
    "electric_vehicles": 3,
    "poles": 2,
    "pole_power_kwh": 40.0,
    "cost_params": {"k_gas": 0.08, "k_elec": 0.12},
}


def parse_gtfs_time(text: str) -> int:
    """Seconds after midnight for HH:MM:SS; hours may exceed 23."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise InstanceParseError(f"bad GTFS time {text!r}")
    try:
        h, m, s = (int(p) for p in parts)
    except ValueError as exc:
        raise InstanceParseError(f"bad GTFS time {text!r}") from exc
    if h < 0 or not 0 <= m < 60 or not 0 <= s < 60:
        raise InstanceParseError(f"bad GTFS time {text!r}")
    return h * 3600 + m * 60 + s


def _read(directory: Path, name: str, required: tuple[str, ...]) -> list[dict]:
    path = directory / name
    if not path.is_file():
        raise InstanceParseError(f"missing required GTFS file {name}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        rows = [{k.strip(): (v or "").strip() for k, v in row.items() if k} for row in reader]
        cols = {c.strip() for c in reader.fieldnames or ()}
    missing = [c for c in required if c not in cols]
    if missing:
        raise InstanceParseError(f"{name} lacks column(s) {', '.join(missing)}")
    return rows


def _load_json(value):
    if value is None or isinstance(value, Mapping):
        return value
    return json.loads(Path(value).read_text())


def _energy_models(source, models: list[VehicleModelSpec]) -> dict[str, float | LinearModel]:
    """Per model id: kWh per km, or a calibrated LinearModel."""
    data = _load_json(source)
    out: dict[str, float | LinearModel] = {m.id: DEFAULT_KWH_PER_KM[m.kind] for m in models}
    if data is None:
        return out
    if "coefficients" in data:
        shared = LinearModel.from_dict(data)
        return {m.id: shared for m in models}
    for mid, val in data.items():
        if isinstance(val, LinearModel):
            out[mid] = val
        elif isinstance(val, Mapping):
            out[mid] = LinearModel.from_dict(val)
        else:
            out[mid] = float(val)
    return out


def _energy(model: float | LinearModel, legs_m: list[float]) -> float:
    if isinstance(model, LinearModel):
        return predict_trip_energy(model, [segment_row(model, d) for d in legs_m])
    return model * sum(legs_m) / 1000.0


def _fleet(source, n_trips: int, depot: str):
    data = _load_json(source) or {}
    models = [
        VehicleModelSpec(m["id"], m["kind"], float(m.get("battery_capacity_kwh", 0.0)))
        for m in data.get("models", DEFAULT_FLEET["models"])
    ]
    if "vehicles" in data:
        vehicles = [
            Vehicle(v["id"], v["model"], float(v.get("initial_charge_kwh", 0.0))) for v in data["vehicles"]
        ]
    else:
        ev = next(m for m in models if m.kind == ELECTRIC)
        liquid = next(m for m in models if m.kind != ELECTRIC)
        vehicles = [
            Vehicle(f"{ev.id}{i + 1:02d}", ev.id, ev.battery_capacity_kwh)
            for i in range(DEFAULT_FLEET["electric_vehicles"])
        ]
        # one liquid-fuel bus per trip keeps the default fleet feasible
        vehicles += [Vehicle(f"{liquid.id}{i + 1:02d}", liquid.id, 0.0) for i in range(n_trips)]
    electric = [m.id for m in models if m.is_electric]
    if "poles" in data:
        poles = [
            ChargingPole(p["id"], p.get("location", depot), {k: float(x) for k, x in p["power_per_slot_kwh"].items()})
            for p in data["poles"]
        ]
    else:
        poles = [
            ChargingPole(f"CP{i + 1}", depot, {mid: DEFAULT_FLEET["pole_power_kwh"] for mid in electric})
            for i in range(DEFAULT_FLEET["poles"])
        ]
    cost = CostParams(**data.get("cost_params", DEFAULT_FLEET["cost_params"]))
    return models, vehicles, poles, cost, int(data.get("slot_length_s", 3600))


def ingest_gtfs(
    directory: str | Path,
    deadhead: str | Path = "haversine",
    energy_model=None,
    fleet=None,
) -> Instance:
    """Instance from ``trips.txt``, ``stop_times.txt`` and ``stops.txt``.

    ``deadhead`` is "haversine" or a CSV with columns from,to,duration_s;
    pairs missing from the CSV fall back to haversine distance at 25 km/h.
    ``energy_model`` maps model ids to kWh per km or to calibrated models
    (a dict or a JSON file); the default uses per-kind constants. ``fleet``
    is a dict or JSON file with models, vehicles, poles and cost weights.
    """
    d = Path(directory)
    stops = _read(d, "stops.txt", ("stop_id", "stop_lat", "stop_lon"))
    trips_rows = _read(d, "trips.txt", ("trip_id",))
    times = _read(d, "stop_times.txt", ("trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"))

    stop_pos = {}
    for s in stops:
        try:
            stop_pos[s["stop_id"]] = (float(s["stop_lat"]), float(s["stop_lon"]))
        except ValueError as exc:
            raise InstanceParseError(f"stop {s['stop_id']!r} has bad coordinates") from exc
    trip_ids = [t["trip_id"] for t in trips_rows]
    calls: dict[str, list[tuple[int, str, str, str]]] = {t: [] for t in trip_ids}
    for row in times:
        if row["trip_id"] not in calls:
            raise InstanceParseError(f"stop_times references unknown trip {row['trip_id']!r}")
        if row["stop_id"] not in stop_pos:
            raise InstanceParseError(f"stop_times references unknown stop {row['stop_id']!r}")
        try:
            seq = int(row["stop_sequence"])
        except ValueError as exc:
            raise InstanceParseError(f"bad stop_sequence {row['stop_sequence']!r}") from exc
        calls[row["trip_id"]].append((seq, row["stop_id"], row["arrival_time"], row["departure_time"]))

    depot_id = "depot"
    while depot_id in stop_pos:
        depot_id += "_"
    lat_c = sum(p[0] for p in stop_pos.values()) / len(stop_pos)
    lon_c = sum(p[1] for p in stop_pos.values()) / len(stop_pos)

    trips, legs = [], {}
    for tid in trip_ids:
        seq = sorted(calls[tid])
        if len(seq) < 2:
            raise InstanceParseError(f"trip {tid!r} needs at least two stop_times")
        start = parse_gtfs_time(seq[0][3] or seq[0][2])
        end = parse_gtfs_time(seq[-1][2] or seq[-1][3])
        trips.append(TransitTrip(tid, seq[0][1], seq[-1][1], start, end))
        legs[tid] = [
            haversine_m(*stop_pos[a[1]], *stop_pos[b[1]]) for a, b in zip(seq, seq[1:])
        ]

    terminals = sorted({t.origin for t in trips} | {t.destination for t in trips})
    locations = [Location(s, *stop_pos[s]) for s in terminals] + [Location(depot_id, lat_c, lon_c)]
    pos = {loc.id: (loc.lat, loc.lon) for loc in locations}

    models, vehicles, poles, cost, slot_len = _fleet(fleet, len(trips), depot_id)
    energy_by_model = _energy_models(energy_model, models)

    durations: dict[tuple[str, str], float] = {}
    if str(deadhead) != "haversine":
        with open(deadhead, newline="") as fh:
            for row in csv.DictReader(fh):
                durations[(row["from"].strip(), row["to"].strip())] = float(row["duration_s"])

    dh = {}
    for a in locations:
        for b in locations:
            if a.id == b.id:
                continue
            dist = haversine_m(*pos[a.id], *pos[b.id])
            dur = durations.get((a.id, b.id))
            if dur is None:
                dur = math.ceil(dist / 1000.0 / DEADHEAD_SPEED_KMH * 3600.0)
            dh[(a.id, b.id)] = DeadheadEntry(dur, {m.id: _energy(energy_by_model[m.id], [dist]) for m in models})

    energy = {(t.id, m.id): _energy(energy_by_model[m.id], legs[t.id]) for t in trips for m in models}
    day_end = math.ceil(max(86400, *(t.end_s for t in trips)) / slot_len) * slot_len
    return Instance(
        tuple(models), tuple(vehicles), tuple(locations), tuple(trips), tuple(poles),
        SlotGrid(0, day_end, slot_len), dh, energy, cost,
    )

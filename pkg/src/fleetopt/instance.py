"""Optimization-domain types, instance JSON I/O and the deadhead lookup.

All energies are kWh and all times are integer seconds since local midnight.
Every collection is iterated in lexicographic id order so that the solvers
built on top of these types are deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import InstanceParseError, InstanceValidationError, MissingDeadheadError

LIQUID_FUEL = "liquid_fuel"
ELECTRIC = "electric"
VEHICLE_KINDS = (LIQUID_FUEL, ELECTRIC)

# diesel lower heating value
KWH_PER_GALLON = 37.95


@dataclass(frozen=True)
class VehicleModelSpec:
    id: str
    kind: str
    battery_capacity_kwh: float = 0.0

    @property
    def is_electric(self) -> bool:
        return self.kind == ELECTRIC


@dataclass(frozen=True)
class Vehicle:
    id: str
    model: str
    initial_charge_kwh: float = 0.0


@dataclass(frozen=True)
class Location:
    id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class TransitTrip:
    id: str
    origin: str
    destination: str
    start_s: int
    end_s: int


@dataclass(frozen=True)
class ChargingPole:
    id: str
    location: str
    power_per_slot_kwh: Mapping[str, float]


@dataclass(frozen=True)
class SlotGrid:
    day_start_s: int = 0
    day_end_s: int = 86400
    slot_length_s: int = 3600

    @property
    def n_slots(self) -> int:
        return (self.day_end_s - self.day_start_s) // self.slot_length_s

    def slot_start(self, k: int) -> int:
        return self.day_start_s + k * self.slot_length_s

    def slot_end(self, k: int) -> int:
        return self.day_start_s + (k + 1) * self.slot_length_s

    def slot_index_by_end(self, t: float) -> int:
        """First slot whose end is at or after ``t`` (clamped to the grid)."""
        k = math.ceil((t - self.day_start_s) / self.slot_length_s) - 1
        return min(max(k, 0), self.n_slots - 1)


@dataclass(frozen=True)
class DeadheadEntry:
    duration_s: float
    energy_kwh: Mapping[str, float]


@dataclass(frozen=True)
class CostParams:
    k_gas: float = 1.0
    k_elec: float = 1.0


@dataclass(frozen=True)
class Instance:
    models: tuple[VehicleModelSpec, ...]
    vehicles: tuple[Vehicle, ...]
    locations: tuple[Location, ...]
    trips: tuple[TransitTrip, ...]
    charging_poles: tuple[ChargingPole, ...]
    slot_grid: SlotGrid
    deadhead: Mapping[tuple[str, str], DeadheadEntry]
    energy_table: Mapping[tuple[str, str], float]
    cost_params: CostParams = field(default_factory=CostParams)

    def __post_init__(self):
        # canonical ordering makes structural equality independent of input order
        for name in ("models", "vehicles", "locations", "trips", "charging_poles"):
            items = tuple(sorted(getattr(self, name), key=lambda o: o.id))
            object.__setattr__(self, name, items)
        deadhead = dict(self.deadhead)
        for loc in self.locations:
            deadhead.setdefault((loc.id, loc.id), DeadheadEntry(0.0, {m.id: 0.0 for m in self.models}))
        object.__setattr__(self, "deadhead", dict(sorted(deadhead.items())))
        object.__setattr__(self, "energy_table", dict(sorted(self.energy_table.items())))
        check_instance(self)

    @cached_property
    def model_by_id(self) -> dict[str, VehicleModelSpec]:
        return {m.id: m for m in self.models}

    @cached_property
    def vehicle_by_id(self) -> dict[str, Vehicle]:
        return {v.id: v for v in self.vehicles}

    @cached_property
    def location_by_id(self) -> dict[str, Location]:
        return {loc.id: loc for loc in self.locations}

    @cached_property
    def trip_by_id(self) -> dict[str, TransitTrip]:
        return {t.id: t for t in self.trips}

    @cached_property
    def pole_by_id(self) -> dict[str, ChargingPole]:
        return {p.id: p for p in self.charging_poles}

    def vehicle_model(self, vehicle_id: str) -> VehicleModelSpec:
        return self.model_by_id[self.vehicle_by_id[vehicle_id].model]

    def is_electric(self, vehicle_id: str) -> bool:
        return self.vehicle_model(vehicle_id).is_electric

    def cost_weight(self, vehicle_id: str) -> float:
        if self.is_electric(vehicle_id):
            return self.cost_params.k_elec
        return self.cost_params.k_gas

    @cached_property
    def index(self) -> "InstanceIndex":
        return InstanceIndex(self)


def _fail(msg: str):
    raise InstanceValidationError(msg)


def check_instance(inst: Instance) -> None:
    """Raise InstanceValidationError naming the first violated invariant."""
    for name in ("models", "vehicles", "locations", "trips", "charging_poles"):
        ids = [o.id for o in getattr(inst, name)]
        seen = set()
        for i in ids:
            if i in seen:
                _fail(f"duplicate id {i!r} in {name}")
            seen.add(i)
    if not inst.vehicles:
        _fail("instance needs at least one vehicle")
    if not inst.trips:
        _fail("instance needs at least one trip")

    models = {m.id: m for m in inst.models}
    for m in inst.models:
        if m.kind not in VEHICLE_KINDS:
            _fail(f"model {m.id!r} has unknown kind {m.kind!r}")
        if not (m.battery_capacity_kwh >= 0 and math.isfinite(m.battery_capacity_kwh)):
            _fail(f"model {m.id!r} has invalid battery capacity")
        if m.is_electric and m.battery_capacity_kwh <= 0:
            _fail(f"electric model {m.id!r} needs a positive battery capacity")

    for v in inst.vehicles:
        if v.model not in models:
            _fail(f"vehicle {v.id!r} references unknown model {v.model!r}")
        m = models[v.model]
        if v.initial_charge_kwh < 0:
            _fail(f"vehicle {v.id!r} has negative initial charge")
        if m.is_electric and v.initial_charge_kwh > m.battery_capacity_kwh:
            _fail(f"vehicle {v.id!r} initial charge exceeds capacity of {m.id!r}")
        if not m.is_electric and v.initial_charge_kwh != 0:
            _fail(f"liquid-fuel vehicle {v.id!r} must have zero initial charge")

    locs = {loc.id for loc in inst.locations}
    for loc in inst.locations:
        if not -90.0 <= loc.lat <= 90.0:
            _fail(f"location {loc.id!r} latitude out of range")
        if not -180.0 <= loc.lon <= 180.0:
            _fail(f"location {loc.id!r} longitude out of range")

    g = inst.slot_grid
    if g.slot_length_s <= 0:
        _fail("slot_length_s must be positive")
    if g.day_end_s <= g.day_start_s or (g.day_end_s - g.day_start_s) % g.slot_length_s:
        _fail("slot grid span must be a positive multiple of slot_length_s")

    for t in inst.trips:
        for end in (t.origin, t.destination):
            if end not in locs:
                _fail(f"trip {t.id!r} references unknown location {end!r}")
        if not t.start_s < t.end_s:
            _fail(f"trip {t.id!r} must start before it ends")
        if t.start_s < g.day_start_s or t.end_s > g.day_end_s:
            _fail(f"trip {t.id!r} lies outside the slot grid")

    electric = [m.id for m in inst.models if m.is_electric]
    for p in inst.charging_poles:
        if p.location not in locs:
            _fail(f"charging pole {p.id!r} references unknown location {p.location!r}")
        for mid in electric:
            if mid not in p.power_per_slot_kwh:
                _fail(f"charging pole {p.id!r} lacks power for model {mid!r}")
        for mid, val in p.power_per_slot_kwh.items():
            if not (val >= 0 and math.isfinite(val)):
                _fail(f"charging pole {p.id!r} has invalid power for {mid!r}")

    for (a, b), entry in inst.deadhead.items():
        for end in (a, b):
            if end not in locs:
                _fail(f"deadhead entry references unknown location {end!r}")
        if not (entry.duration_s >= 0 and math.isfinite(entry.duration_s)):
            _fail(f"deadhead ({a!r}, {b!r}) has invalid duration")
        for mid, val in entry.energy_kwh.items():
            if not (val >= 0 and math.isfinite(val)):
                _fail(f"deadhead ({a!r}, {b!r}) has invalid energy for {mid!r}")
        if a == b and (entry.duration_s != 0 or any(v != 0 for v in entry.energy_kwh.values())):
            _fail(f"deadhead ({a!r}, {a!r}) must be zero")
        for mid in models:
            if mid not in entry.energy_kwh:
                _fail(f"deadhead ({a!r}, {b!r}) lacks energy for model {mid!r}")

    for t in inst.trips:
        for mid in models:
            val = inst.energy_table.get((t.id, mid))
            if val is None:
                _fail(f"energy table lacks entry for trip {t.id!r} and model {mid!r}")
            if not (val >= 0 and math.isfinite(val)):
                _fail(f"energy for trip {t.id!r} and model {mid!r} is invalid")
    trip_ids = {t.id for t in inst.trips}
    for tid, mid in inst.energy_table:
        if tid not in trip_ids:
            _fail(f"energy table references unknown trip {tid!r}")
        if mid not in models:
            _fail(f"energy table references unknown model {mid!r}")

    c = inst.cost_params
    if not (math.isfinite(c.k_gas) and math.isfinite(c.k_elec) and c.k_gas >= 0 and c.k_elec >= 0):
        _fail("cost weights must be finite and non-negative")


def deadhead_duration(instance: Instance, origin: str, destination: str) -> float:
    """Directed deadhead duration D(origin, destination) in seconds."""
    for loc in (origin, destination):
        if loc not in instance.location_by_id:
            raise InstanceValidationError(f"unknown location {loc!r}")
    try:
        return instance.deadhead[(origin, destination)].duration_s
    except KeyError:
        raise MissingDeadheadError(origin, destination) from None


def deadhead_energy(instance: Instance, origin: str, destination: str, model: str) -> float:
    try:
        return instance.deadhead[(origin, destination)].energy_kwh[model]
    except KeyError:
        raise MissingDeadheadError(origin, destination) from None


@dataclass(frozen=True)
class Solution:
    """Trip and charging assignments.

    ``trip_assignments`` holds (vehicle, trip) pairs and ``charging_assignments``
    holds (vehicle, pole, slot) triples.
    """

    trip_assignments: frozenset[tuple[str, str]] = frozenset()
    charging_assignments: frozenset[tuple[str, str, int]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "trip_assignments", frozenset(tuple(p) for p in self.trip_assignments))
        object.__setattr__(
            self,
            "charging_assignments",
            frozenset((v, p, int(s)) for v, p, s in self.charging_assignments),
        )

    def trips_of(self, vehicle: str) -> list[str]:
        return sorted(t for v, t in self.trip_assignments if v == vehicle)

    def charges_of(self, vehicle: str) -> list[tuple[str, int]]:
        return sorted((p, s) for v, p, s in self.charging_assignments if v == vehicle)

    def vehicle_of(self) -> dict[str, str]:
        return {t: v for v, t in sorted(self.trip_assignments)}

    def restricted_to(self, vehicle: str) -> "Solution":
        return Solution(
            frozenset(a for a in self.trip_assignments if a[0] == vehicle),
            frozenset(a for a in self.charging_assignments if a[0] == vehicle),
        )

    def __len__(self) -> int:
        return len(self.trip_assignments) + len(self.charging_assignments)


class InstanceIndex:
    """Integer-indexed arrays of an instance, shared by the solvers.

    Tasks are numbered trips first (lexicographic id order), then charging
    slots as ``n_trips + pole * n_slots + slot``.
    """

    def __init__(self, inst: Instance):
        self.instance = inst
        self.trip_ids = [t.id for t in inst.trips]
        self.trip_pos = {tid: i for i, tid in enumerate(self.trip_ids)}
        self.vehicle_ids = [v.id for v in inst.vehicles]
        self.vehicle_pos = {vid: i for i, vid in enumerate(self.vehicle_ids)}
        self.model_ids = [m.id for m in inst.models]
        self.model_pos = {mid: i for i, mid in enumerate(self.model_ids)}
        self.loc_ids = [loc.id for loc in inst.locations]
        self.loc_pos = {lid: i for i, lid in enumerate(self.loc_ids)}
        self.pole_ids = [p.id for p in inst.charging_poles]
        self.pole_pos = {pid: i for i, pid in enumerate(self.pole_ids)}

        g = inst.slot_grid
        self.n_slots = g.n_slots
        self.slot_start = [g.slot_start(k) for k in range(self.n_slots)]
        self.slot_end = [g.slot_end(k) for k in range(self.n_slots)]
        self.n_trips = len(self.trip_ids)
        self.n_poles = len(self.pole_ids)
        self.n_tasks = self.n_trips + self.n_poles * self.n_slots

        start, end, orig, dest = [], [], [], []
        for t in inst.trips:
            start.append(t.start_s)
            end.append(t.end_s)
            orig.append(self.loc_pos[t.origin])
            dest.append(self.loc_pos[t.destination])
        for p in inst.charging_poles:
            lp = self.loc_pos[p.location]
            for k in range(self.n_slots):
                start.append(self.slot_start[k])
                end.append(self.slot_end[k])
                orig.append(lp)
                dest.append(lp)
        self.task_start = start
        self.task_end = end
        self.task_origin = orig
        self.task_dest = dest

        n_loc = len(self.loc_ids)
        n_mod = len(self.model_ids)
        self.dh_time = np.full((n_loc, n_loc), np.inf)
        self.dh_energy = np.full((n_mod, n_loc, n_loc), np.inf)
        for (a, b), entry in inst.deadhead.items():
            ia, ib = self.loc_pos[a], self.loc_pos[b]
            self.dh_time[ia, ib] = entry.duration_s
            for mid, val in entry.energy_kwh.items():
                self.dh_energy[self.model_pos[mid], ia, ib] = val
        self.dh_energy_list = self.dh_energy.tolist()
        self.dh_time_list = self.dh_time.tolist()

        self.trip_energy = np.zeros((n_mod, self.n_trips))
        for (tid, mid), val in inst.energy_table.items():
            self.trip_energy[self.model_pos[mid], self.trip_pos[tid]] = val
        self.trip_energy_list = self.trip_energy.tolist()

        self.vehicle_model = [self.model_pos[v.model] for v in inst.vehicles]
        self.vehicle_electric = [inst.model_by_id[v.model].is_electric for v in inst.vehicles]
        self.vehicle_capacity = [inst.model_by_id[v.model].battery_capacity_kwh for v in inst.vehicles]
        self.vehicle_initial = [v.initial_charge_kwh for v in inst.vehicles]
        self.vehicle_weight = [
            inst.cost_params.k_elec if e else inst.cost_params.k_gas for e in self.vehicle_electric
        ]
        # pole power by (pole, model)
        self.pole_power = [
            [p.power_per_slot_kwh.get(mid, 0.0) for mid in self.model_ids] for p in inst.charging_poles
        ]
        self.pole_location = [self.loc_pos[p.location] for p in inst.charging_poles]

    def task_key(self, x: int) -> tuple:
        """Chronological ordering key with id tie-break."""
        return (self.task_start[x], self.task_label(x))

    def task_label(self, x: int) -> str:
        if x < self.n_trips:
            return self.trip_ids[x]
        p, k = divmod(x - self.n_trips, self.n_slots)
        return f"{self.pole_ids[p]}@{k}"

    def charge_task(self, pole: int, slot: int) -> int:
        return self.n_trips + pole * self.n_slots + slot

    def charge_of_task(self, x: int) -> tuple[int, int]:
        return divmod(x - self.n_trips, self.n_slots)

    def is_trip(self, x: int) -> bool:
        return x < self.n_trips

    def slot_of_end(self, t: float) -> int:
        """First slot k with slot_end[k] >= t."""
        return self.instance.slot_grid.slot_index_by_end(t)

    @cached_property
    def follows(self) -> np.ndarray:
        """follows[x1, x2] is True when x2 can be served after x1 (pair feasibility)."""
        s = np.asarray(self.task_start, dtype=float)
        e = np.asarray(self.task_end, dtype=float)
        o = np.asarray(self.task_origin)
        d = np.asarray(self.task_dest)
        return e[:, None] + self.dh_time[d[:, None], o[None, :]] <= s[None, :]

    @cached_property
    def compatible_mask(self) -> list[int]:
        """Bitmask per task of all tasks that may share a vehicle with it."""
        f = self.follows
        both = f | f.T
        masks = []
        for x in range(self.n_tasks):
            row = np.flatnonzero(both[x])
            m = 0
            for y in row.tolist():
                m |= 1 << y
            masks.append(m)
        return masks

    @cached_property
    def triangle_inequality(self) -> bool:
        """True when every deadhead energy matrix satisfies the triangle inequality."""
        for m in range(self.dh_energy.shape[0]):
            e = self.dh_energy[m]
            if not np.all(np.isfinite(e)):
                return False
            via = (e[:, :, None] + e[None, :, :]).min(axis=1)
            if np.any(via < e - 1e-9 * (1.0 + e)):
                return False
        return True

    @cached_property
    def dh_energy_closure(self) -> np.ndarray:
        """Shortest-path closure of the deadhead energy matrices (Floyd-Warshall)."""
        out = self.dh_energy.copy()
        n = out.shape[1]
        for m in range(out.shape[0]):
            e = out[m]
            for k in range(n):
                np.minimum(e, e[:, k : k + 1] + e[k : k + 1, :], out=e)
        return out


# ---------------------------------------------------------------- JSON I/O


def instance_to_dict(inst: Instance) -> dict:
    return {
        "models": [
            {"id": m.id, "kind": m.kind, "battery_capacity_kwh": m.battery_capacity_kwh} for m in inst.models
        ],
        "vehicles": [
            {"id": v.id, "model": v.model, "initial_charge_kwh": v.initial_charge_kwh} for v in inst.vehicles
        ],
        "locations": [{"id": loc.id, "lat": loc.lat, "lon": loc.lon} for loc in inst.locations],
        "trips": [
            {"id": t.id, "origin": t.origin, "destination": t.destination, "start_s": t.start_s, "end_s": t.end_s}
            for t in inst.trips
        ],
        "charging_poles": [
            {"id": p.id, "location": p.location, "power_per_slot_kwh": dict(sorted(p.power_per_slot_kwh.items()))}
            for p in inst.charging_poles
        ],
        "slot_grid": {
            "day_start_s": inst.slot_grid.day_start_s,
            "day_end_s": inst.slot_grid.day_end_s,
            "slot_length_s": inst.slot_grid.slot_length_s,
        },
        "deadhead": [
            {"from": a, "to": b, "duration_s": e.duration_s, "energy_kwh": dict(sorted(e.energy_kwh.items()))}
            for (a, b), e in inst.deadhead.items()
        ],
        "trip_energy": [{"trip": t, "model": m, "energy_kwh": val} for (t, m), val in inst.energy_table.items()],
        "costs": {"k_gas": inst.cost_params.k_gas, "k_elec": inst.cost_params.k_elec},
    }


def _req(obj: dict, key: str, where: str):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise InstanceParseError(f"{where}: missing key {key!r}") from None


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise InstanceParseError("instance document must be a JSON object")
    try:
        models = tuple(
            VehicleModelSpec(str(_req(m, "id", "models")), str(_req(m, "kind", "models")),
                             float(m.get("battery_capacity_kwh", 0.0)))
            for m in _req(data, "models", "instance")
        )
        vehicles = tuple(
            Vehicle(str(_req(v, "id", "vehicles")), str(_req(v, "model", "vehicles")),
                    float(v.get("initial_charge_kwh", 0.0)))
            for v in _req(data, "vehicles", "instance")
        )
        locations = tuple(
            Location(str(_req(loc, "id", "locations")), float(_req(loc, "lat", "locations")),
                     float(_req(loc, "lon", "locations")))
            for loc in _req(data, "locations", "instance")
        )
        trips = tuple(
            TransitTrip(
                str(_req(t, "id", "trips")),
                str(_req(t, "origin", "trips")),
                str(_req(t, "destination", "trips")),
                int(_req(t, "start_s", "trips")),
                int(_req(t, "end_s", "trips")),
            )
            for t in _req(data, "trips", "instance")
        )
        poles = tuple(
            ChargingPole(
                str(_req(p, "id", "charging_poles")),
                str(_req(p, "location", "charging_poles")),
                {str(k): float(v) for k, v in _req(p, "power_per_slot_kwh", "charging_poles").items()},
            )
            for p in data.get("charging_poles", [])
        )
        sg = data.get("slot_grid", {})
        grid = SlotGrid(int(sg.get("day_start_s", 0)), int(sg.get("day_end_s", 86400)),
                        int(sg.get("slot_length_s", 3600)))
        deadhead = {}
        for d in _req(data, "deadhead", "instance"):
            key = (str(_req(d, "from", "deadhead")), str(_req(d, "to", "deadhead")))
            deadhead[key] = DeadheadEntry(
                float(_req(d, "duration_s", "deadhead")),
                {str(k): float(v) for k, v in _req(d, "energy_kwh", "deadhead").items()},
            )
        energy = {}
        for e in _req(data, "trip_energy", "instance"):
            energy[(str(_req(e, "trip", "trip_energy")), str(_req(e, "model", "trip_energy")))] = float(
                _req(e, "energy_kwh", "trip_energy")
            )
        costs = data.get("costs", {})
        cost_params = CostParams(float(costs.get("k_gas", 1.0)), float(costs.get("k_elec", 1.0)))
    except (TypeError, ValueError, AttributeError) as exc:
        raise InstanceParseError(f"malformed instance document: {exc}") from exc
    return Instance(models, vehicles, locations, trips, poles, grid, deadhead, energy, cost_params)


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1, sort_keys=False) + "\n"


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path: str | Path) -> Instance:
    """Read and cross-check an instance JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}: invalid JSON: {exc}") from exc
    return instance_from_dict(data)


def _round6(x):
    if isinstance(x, float):
        return round(x, 6)
    return x


def solution_to_dict(
    solution: Solution,
    cost: float | None = None,
    algorithm: str | None = None,
    seed: int | None = None,
    wall_time_ms: float | None = None,
    **extra,
) -> dict:
    out = {
        "trip_assignments": [{"vehicle": v, "trip": t} for v, t in sorted(solution.trip_assignments)],
        "charging_assignments": [
            {"vehicle": v, "pole": p, "slot": s} for v, p, s in sorted(solution.charging_assignments)
        ],
        "cost": _round6(cost),
        "algorithm": algorithm,
        "seed": seed,
        "wall_time_ms": _round6(wall_time_ms),
    }
    out.update({k: _round6(v) for k, v in extra.items()})
    return out


def solution_from_dict(data: dict) -> Solution:
    try:
        trips = frozenset((str(a["vehicle"]), str(a["trip"])) for a in data.get("trip_assignments", []))
        charges = frozenset(
            (str(a["vehicle"]), str(a["pole"]), int(a["slot"])) for a in data.get("charging_assignments", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceParseError(f"malformed solution document: {exc}") from exc
    return Solution(trips, charges)


def load_solution(path: str | Path) -> Solution:
    try:
        return solution_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}: invalid JSON: {exc}") from exc

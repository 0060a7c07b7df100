"""Seeded synthetic instances: bus lines shuttling between two terminals.

Each line runs trips alternating between its terminals with random layovers;
one depot in the middle of the city hosts two charging poles. Deadhead
distances are great-circle distances scaled by a road factor, so every
deadhead matrix satisfies the triangle inequality.
"""

from __future__ import annotations

import math

import numpy as np

from .geo import destination_point, haversine_m
from .instance import (
    ELECTRIC,
    KWH_PER_GALLON,
    LIQUID_FUEL,
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

DEPOT = (35.0456, -85.3097)
ROAD_FACTOR = 1.3
DEADHEAD_SPEED_KMH = 25.0
EV_KWH_PER_KM = 1.3
ICEV_GAL_PER_KM = 0.13
EV_CAPACITY_KWH = 100.0
POLE_POWER_KWH = 40.0
ICEV_CAP = 50
LATEST_END_S = 23 * 3600 + 1800


def _minute(x: float) -> int:
    return int(round(x / 60.0)) * 60


def generate_instance(
    lines: int,
    trips_per_line: int,
    evs: int,
    icev_factor: int,
    seed: int,
    *,
    n_poles: int = 2,
    slot_length_s: int = 3600,
    k_gas: float = 0.08,
    k_elec: float = 0.12,
) -> Instance:
    """Build a deterministic synthetic instance.

    The fleet holds ``evs`` electric buses and ``min(icev_factor * lines, 50)``
    liquid-fuel buses.
    """
    rng = np.random.default_rng(seed)
    locations = [Location("depot", *DEPOT)]
    trips: list[TransitTrip] = []
    route_km: dict[str, float] = {}

    for li in range(lines):
        tag = f"L{li + 1:02d}"
        bearing = rng.uniform(0.0, 2.0 * math.pi)
        a = destination_point(*DEPOT, bearing, rng.uniform(1500.0, 6000.0))
        b = destination_point(*a, bearing + rng.uniform(-1.2, 1.2), rng.uniform(5000.0, 11000.0))
        loc_a = Location(f"{tag}A", round(a[0], 6), round(a[1], 6))
        loc_b = Location(f"{tag}B", round(b[0], 6), round(b[1], 6))
        locations += [loc_a, loc_b]

        km = ROAD_FACTOR * haversine_m(loc_a.lat, loc_a.lon, loc_b.lat, loc_b.lon) / 1000.0
        speed = rng.uniform(16.0, 22.0)
        duration = max(_minute(km / speed * 3600.0), 600)
        layovers = [_minute(x) for x in rng.uniform(300.0, 5400.0, size=max(trips_per_line - 1, 0))]
        first = _minute(rng.uniform(5.5 * 3600, 7.5 * 3600))
        span = trips_per_line * duration + sum(layovers)
        starts = None
        if first + span > LATEST_END_S:
            room = LATEST_END_S - first - trips_per_line * duration
            if room >= 0:
                scale = room / sum(layovers)
                layovers = [int(x * scale) // 60 * 60 for x in layovers]
            else:
                # too many trips for one bus: spread starts evenly, trips overlap
                step = (LATEST_END_S - first - duration) / (trips_per_line - 1)
                starts = [first + int(k * step) // 60 * 60 for k in range(trips_per_line)]
        if starts is None:
            starts = [first]
            for lay in layovers:
                starts.append(starts[-1] + duration + lay)
        for k, start in enumerate(starts):
            tid = f"{tag}T{k + 1:02d}"
            origin, dest = (loc_a, loc_b) if k % 2 == 0 else (loc_b, loc_a)
            trips.append(TransitTrip(tid, origin.id, dest.id, int(start), int(start + duration)))
            route_km[tid] = km

    models = (
        VehicleModelSpec("EV", ELECTRIC, EV_CAPACITY_KWH),
        VehicleModelSpec("ICEV", LIQUID_FUEL, 0.0),
    )
    vehicles = []
    for i in range(evs):
        soc = rng.uniform(0.3, 0.7)
        vehicles.append(Vehicle(f"EV{i + 1:02d}", "EV", round(EV_CAPACITY_KWH * soc, 3)))
    n_icev = min(icev_factor * lines, ICEV_CAP)
    vehicles += [Vehicle(f"ICEV{i + 1:02d}", "ICEV", 0.0) for i in range(n_icev)]

    poles = tuple(ChargingPole(f"CP{i + 1}", "depot", {"EV": POLE_POWER_KWH}) for i in range(n_poles))

    energy = {}
    for t in trips:
        km = route_km[t.id]
        # city driving: electric draw well below diesel
        energy[(t.id, "EV")] = round(km * EV_KWH_PER_KM * rng.uniform(0.85, 1.15), 4)
        energy[(t.id, "ICEV")] = round(km * ICEV_GAL_PER_KM * KWH_PER_GALLON * rng.uniform(0.85, 1.15), 4)

    deadhead = {}
    for la in locations:
        for lb in locations:
            if la.id == lb.id:
                deadhead[(la.id, lb.id)] = DeadheadEntry(0, {"EV": 0.0, "ICEV": 0.0})
                continue
            km = ROAD_FACTOR * haversine_m(la.lat, la.lon, lb.lat, lb.lon) / 1000.0
            deadhead[(la.id, lb.id)] = DeadheadEntry(
                math.ceil(km / DEADHEAD_SPEED_KMH * 3600.0),
                {"EV": km * EV_KWH_PER_KM, "ICEV": km * ICEV_GAL_PER_KM * KWH_PER_GALLON},
            )

    grid = SlotGrid(0, 86400, slot_length_s)
    return Instance(
        models, tuple(vehicles), tuple(locations), tuple(trips), poles, grid, deadhead, energy,
        CostParams(k_gas=k_gas, k_elec=k_elec),
    )


def random_instance(
    seed: int,
    n_vehicles: int = 2,
    n_trips: int = 4,
    n_slots: int = 2,
    *,
    n_locations: int = 3,
    n_poles: int = 1,
    slot_length_s: int = 1800,
    missing_deadhead: float = 0.0,
    metric: bool = False,
) -> Instance:
    """Small unstructured instance for property tests and brute-force checks.

    Deadhead energies are drawn independently, so the triangle inequality may
    fail unless ``metric`` derives them from distances; ``missing_deadhead`` is the chance that an off-diagonal pair has no
    deadhead entry at all. At least one vehicle is electric.
    """
    rng = np.random.default_rng(seed)
    horizon = n_slots * slot_length_s
    locations = [
        Location(f"S{i}", round(35.0 + rng.uniform(0, 0.05), 6), round(-85.3 + rng.uniform(0, 0.05), 6))
        for i in range(n_locations)
    ]
    models = (
        VehicleModelSpec("E", ELECTRIC, round(float(rng.uniform(20.0, 40.0)), 3)),
        VehicleModelSpec("D", LIQUID_FUEL, 0.0),
    )
    vehicles = []
    for i in range(n_vehicles):
        electric = i == 0 or rng.random() < 0.5
        init = round(float(rng.uniform(2.0, 20.0)), 3) if electric else 0.0
        vehicles.append(Vehicle(f"V{i + 1}", "E" if electric else "D", init))
    trips = []
    energy = {}
    for i in range(n_trips):
        dur = int(rng.integers(5, max(6, horizon // 240))) * 60
        start = int(rng.integers(0, max(1, (horizon - dur) // 60 + 1))) * 60
        o, d = rng.choice(n_locations, size=2)
        tid = f"T{i + 1}"
        trips.append(TransitTrip(tid, locations[o].id, locations[d].id, start, start + dur))
        energy[(tid, "E")] = round(float(rng.uniform(1.0, 12.0)), 4)
        energy[(tid, "D")] = round(float(rng.uniform(3.0, 30.0)), 4)
    deadhead = {}
    for la in locations:
        for lb in locations:
            if la.id == lb.id or rng.random() < missing_deadhead:
                continue
            if metric:
                km = haversine_m(la.lat, la.lon, lb.lat, lb.lon) / 1000.0
                deadhead[(la.id, lb.id)] = DeadheadEntry(math.ceil(km / 0.5) * 60, {"E": km, "D": 2.0 * km})
                continue
            deadhead[(la.id, lb.id)] = DeadheadEntry(
                int(rng.integers(0, 20)) * 60,
                {"E": round(float(rng.uniform(0.0, 4.0)), 4), "D": round(float(rng.uniform(0.0, 8.0)), 4)},
            )
    poles = tuple(
        ChargingPole(f"P{i + 1}", locations[int(rng.integers(n_locations))].id,
                     {"E": round(float(rng.uniform(5.0, 15.0)), 3)})
        for i in range(n_poles)
    )
    return Instance(
        models, tuple(vehicles), tuple(locations), tuple(trips), poles,
        SlotGrid(0, horizon, slot_length_s), deadhead, energy,
        CostParams(k_gas=round(float(rng.uniform(0.5, 1.5)), 3), k_elec=round(float(rng.uniform(0.5, 1.5)), 3)),
    )

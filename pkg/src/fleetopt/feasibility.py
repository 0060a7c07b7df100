"""Constraint predicates, the battery ledger, solution validation and cost.

This module is the single source of truth for what a feasible solution is;
the greedy, annealing and exact solvers all defer to it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import accumulate

import numpy as np

from .errors import InstanceValidationError
from .instance import Instance, InstanceIndex, Solution

# strict lower battery bound, absorbed float noise
EPS_KWH = 1e-9

VIOLATION_KINDS = (
    "unassigned_trip",
    "double_assigned_trip",
    "slot_conflict",
    "time_infeasible_pair",
    "battery_underflow",
    "battery_overflow",
    "liquid_vehicle_charging",
    "unknown_reference",
)


@dataclass(frozen=True)
class Task:
    """A transit trip or a charging slot, seen through its time window and ends."""

    kind: str  # "trip" or "charge"
    ref: str  # trip id or pole id
    slot: int | None
    start_s: int
    end_s: int
    origin: str
    destination: str

    @property
    def label(self) -> str:
        return self.ref if self.kind == "trip" else f"{self.ref}@{self.slot}"


def trip_task(instance: Instance, trip_id: str) -> Task:
    t = instance.trip_by_id[trip_id]
    return Task("trip", t.id, None, t.start_s, t.end_s, t.origin, t.destination)


def charging_task(instance: Instance, pole_id: str, slot: int) -> Task:
    p = instance.pole_by_id[pole_id]
    g = instance.slot_grid
    return Task("charge", p.id, slot, g.slot_start(slot), g.slot_end(slot), p.location, p.location)


def pair_feasible(instance: Instance, x1: Task, x2: Task) -> bool:
    """True when a bus finishing x1 can reach x2's origin before x2 starts.

    Callers pass the pair ordered by start time.
    """
    entry = instance.deadhead.get((x1.destination, x2.origin))
    if entry is None:
        return False
    return x1.end_s + entry.duration_s <= x2.start_s


@dataclass
class BatteryProfile:
    vehicle: str
    used_kwh: np.ndarray
    charged_kwh: np.ndarray
    capacity_kwh: float

    @property
    def level_kwh(self) -> np.ndarray:
        return self.charged_kwh - self.used_kwh


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    vehicle: str | None = None
    trip: str | None = None
    pole: str | None = None
    slot: int | None = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        return {"kind": d.pop("kind"), **d}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def to_json(self) -> str:
        return json.dumps([v.to_dict() for v in self.violations], indent=1)


# ---------------------------------------------------------------- internals


def schedules(idx: InstanceIndex, solution: Solution) -> dict[int, list[int]]:
    """Task indices per vehicle position, in chronological order (id tie-break)."""
    out: dict[int, list[int]] = {}
    for v, t in solution.trip_assignments:
        out.setdefault(idx.vehicle_pos[v], []).append(idx.trip_pos[t])
    for v, p, s in solution.charging_assignments:
        out.setdefault(idx.vehicle_pos[v], []).append(idx.charge_task(idx.pole_pos[p], s))
    for tasks in out.values():
        tasks.sort(key=idx.task_key)
    return out


def ledger_arrays(idx: InstanceIndex, v: int, tasks: list[int]) -> tuple[list[float], list[float]]:
    """Per-slot increments of energy used and charged for one vehicle.

    Deadhead energy is booked in the slot where the successor task starts;
    trip energy in the slot where the trip ends; charge in the charging slot.
    """
    n = idx.n_slots
    used = [0.0] * n
    charged = [0.0] * n
    m = idx.vehicle_model[v]
    dh = idx.dh_energy_list[m]
    te = idx.trip_energy_list[m]
    nt = idx.n_trips
    prev = -1
    for x in tasks:
        if prev >= 0:
            used[idx.slot_of_end(idx.task_start[x])] += dh[idx.task_dest[prev]][idx.task_origin[x]]
        if x < nt:
            used[idx.slot_of_end(idx.task_end[x])] += te[x]
        else:
            p, k = idx.charge_of_task(x)
            charged[k] += idx.pole_power[p][m]
        prev = x
    return used, charged


def vehicle_energy(idx: InstanceIndex, v: int, tasks: list[int]) -> float:
    """Trip plus induced deadhead energy of one vehicle's chronological task list."""
    m = idx.vehicle_model[v]
    dh = idx.dh_energy_list[m]
    te = idx.trip_energy_list[m]
    nt = idx.n_trips
    total = 0.0
    prev = -1
    for x in tasks:
        if prev >= 0:
            total += dh[idx.task_dest[prev]][idx.task_origin[x]]
        if x < nt:
            total += te[x]
        prev = x
    return total


def vehicle_cost(idx: InstanceIndex, v: int, tasks: list[int]) -> float:
    return idx.vehicle_weight[v] * vehicle_energy(idx, v, tasks)


def levels(idx: InstanceIndex, v: int, tasks: list[int]) -> list[float]:
    used, charged = ledger_arrays(idx, v, tasks)
    init = idx.vehicle_initial[v]
    return [init + c - u for c, u in zip(accumulate(charged), accumulate(used))]


def battery_ok(idx: InstanceIndex, v: int, tasks: list[int], floor: float = EPS_KWH) -> bool:
    cap = idx.vehicle_capacity[v] + EPS_KWH
    return all(floor <= lv <= cap for lv in levels(idx, v, tasks))


def time_ok(idx: InstanceIndex, tasks: list[int]) -> bool:
    follows = idx.follows
    for i, a in enumerate(tasks):
        for b in tasks[i + 1 :]:
            if not follows[a, b]:
                return False
    return True


def _check_refs(instance: Instance, solution: Solution) -> list[Violation]:
    out = []
    n_slots = instance.slot_grid.n_slots
    for v, t in sorted(solution.trip_assignments):
        if v not in instance.vehicle_by_id:
            out.append(Violation("unknown_reference", f"unknown vehicle {v!r}", vehicle=v, trip=t))
        if t not in instance.trip_by_id:
            out.append(Violation("unknown_reference", f"unknown trip {t!r}", vehicle=v, trip=t))
    for v, p, s in sorted(solution.charging_assignments):
        if v not in instance.vehicle_by_id:
            out.append(Violation("unknown_reference", f"unknown vehicle {v!r}", vehicle=v, pole=p, slot=s))
        if p not in instance.pole_by_id:
            out.append(Violation("unknown_reference", f"unknown pole {p!r}", vehicle=v, pole=p, slot=s))
        if not 0 <= s < n_slots:
            out.append(Violation("unknown_reference", f"slot {s} outside the grid", vehicle=v, pole=p, slot=s))
    return out


def _require_refs(instance: Instance, solution: Solution) -> None:
    bad = _check_refs(instance, solution)
    if bad:
        raise InstanceValidationError(bad[0].detail)


# ---------------------------------------------------------------- public API


def battery_profile(instance: Instance, solution: Solution, vehicle: str) -> BatteryProfile:
    """Cumulative energy used and charged per slot for one electric vehicle."""
    _require_refs(instance, solution)
    idx = instance.index
    v = idx.vehicle_pos[vehicle]
    if not idx.vehicle_electric[v]:
        raise ValueError(f"vehicle {vehicle!r} is not electric")
    tasks = schedules(idx, solution.restricted_to(vehicle)).get(v, [])
    used, charged = ledger_arrays(idx, v, tasks)
    used_c = np.cumsum(used)
    charged_c = np.cumsum(charged) + idx.vehicle_initial[v]
    return BatteryProfile(vehicle, used_c, charged_c, idx.vehicle_capacity[v])


def solution_cost(instance: Instance, solution: Solution) -> float:
    """Weighted energy of all trips and induced deadheads; 0 for the empty solution."""
    _require_refs(instance, solution)
    idx = instance.index
    return sum(vehicle_cost(idx, v, tasks) for v, tasks in sorted(schedules(idx, solution).items()))


def validate_solution(instance: Instance, solution: Solution) -> ValidationReport:
    """List every constraint violation of ``solution``; empty means feasible and complete."""
    report = ValidationReport(_check_refs(instance, solution))
    if report.violations:
        return report
    idx = instance.index
    viol = report.violations

    owners: dict[str, list[str]] = {}
    for v, t in sorted(solution.trip_assignments):
        owners.setdefault(t, []).append(v)
    for t in idx.trip_ids:
        vs = owners.get(t, [])
        if not vs:
            viol.append(Violation("unassigned_trip", f"trip {t!r} has no vehicle", trip=t))
        elif len(vs) > 1:
            viol.append(Violation("double_assigned_trip", f"trip {t!r} served by {', '.join(vs)}", trip=t))

    slot_users: dict[tuple[str, int], list[str]] = {}
    for v, p, s in sorted(solution.charging_assignments):
        slot_users.setdefault((p, s), []).append(v)
        if not instance.is_electric(v):
            viol.append(Violation("liquid_vehicle_charging", f"{v!r} cannot charge", vehicle=v, pole=p, slot=s))
    for (p, s), vs in sorted(slot_users.items()):
        if len(vs) > 1:
            viol.append(Violation("slot_conflict", f"slot shared by {', '.join(vs)}", pole=p, slot=s))

    follows = idx.follows
    for v, tasks in sorted(schedules(idx, solution).items()):
        vid = idx.vehicle_ids[v]
        for i, a in enumerate(tasks):
            for b in tasks[i + 1 :]:
                if not follows[a, b]:
                    trip = next((idx.trip_ids[x] for x in (b, a) if x < idx.n_trips), None)
                    viol.append(
                        Violation(
                            "time_infeasible_pair",
                            f"{idx.task_label(a)} -> {idx.task_label(b)} cannot both be served",
                            vehicle=vid,
                            trip=trip,
                        )
                    )
        if not idx.vehicle_electric[v]:
            continue
        cap = idx.vehicle_capacity[v]
        lv = levels(idx, v, tasks)
        for kind, bad in (
            ("battery_underflow", [x < EPS_KWH for x in lv]),
            ("battery_overflow", [x > cap + EPS_KWH for x in lv]),
        ):
            for k, flag in enumerate(bad):
                if flag and (k == 0 or not bad[k - 1]):
                    viol.append(Violation(kind, f"level {lv[k]:.6f} kWh at end of slot {k}", vehicle=vid, slot=k))
    return report

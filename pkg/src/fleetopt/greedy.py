"""Biased-cost greedy construction with charging repair.

The greedy repeatedly commits the (vehicle, trip) pair with the lowest biased
cost: the trip's energy plus the deadheads to and from the vehicle's
neighbouring assignments plus an alpha-weighted layover penalty. After each
electric commit the vehicle's battery ledger is checked and charging slots are
inserted until it clears the safety floor.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .errors import ChargingRepairFailed, InfeasibleError
from .feasibility import EPS_KWH, Task, levels, schedules
from .instance import Instance, InstanceIndex, Solution

INF = math.inf


@dataclass(frozen=True)
class GreedyConfig:
    alpha: float = 0.0005  # kWh per second of layover
    charging_safety_floor_kwh: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError("alpha must be finite and non-negative")
        if self.charging_safety_floor_kwh < 0:
            raise ValueError("charging_safety_floor_kwh must be non-negative")

    @property
    def floor(self) -> float:
        return max(self.charging_safety_floor_kwh, EPS_KWH)


CostLedger = dict  # (vehicle id, trip id) -> biased cost or inf


def _task_index(idx: InstanceIndex, task: Task) -> int:
    if task.kind == "trip":
        return idx.trip_pos[task.ref]
    return idx.charge_task(idx.pole_pos[task.ref], task.slot)


def insert_task(idx: InstanceIndex, tasks: list[int], x: int) -> list[int]:
    out = list(tasks)
    bisect.insort(out, x, key=idx.task_key)
    return out


def _fits(idx: InstanceIndex, tasks: list[int], x: int) -> bool:
    cm = idx.compatible_mask[x]
    return all((cm >> y) & 1 for y in tasks)


def _biased(idx: InstanceIndex, v: int, tasks: list[int], x: int, alpha: float) -> float:
    """Biased cost of adding task x to vehicle v; inf when x clashes in time."""
    if not _fits(idx, tasks, x):
        return INF
    m = idx.vehicle_model[v]
    dh = idx.dh_energy_list[m]
    cost = idx.trip_energy_list[m][x] if x < idx.n_trips else 0.0
    xs, xe = idx.task_start[x], idx.task_end[x]
    prev = nxt = -1
    for y in tasks:
        if idx.task_end[y] <= xs and (prev < 0 or idx.task_end[y] > idx.task_end[prev]):
            prev = y
        if xe <= idx.task_start[y] and (nxt < 0 or idx.task_start[y] < idx.task_start[nxt]):
            nxt = y
    if prev >= 0:
        cost += dh[idx.task_dest[prev]][idx.task_origin[x]] + alpha * (xs - idx.task_end[prev])
    if nxt >= 0:
        cost += dh[idx.task_dest[x]][idx.task_origin[nxt]] + alpha * (idx.task_start[nxt] - xe)
    return cost


def biased_cost(instance: Instance, partial: Solution, vehicle: str, task: Task, alpha: float,
                floor: float = EPS_KWH) -> float:
    """Biased energy cost of assigning ``task`` to ``vehicle`` on top of ``partial``.

    Returns inf when the task clashes with the vehicle's schedule, or when an
    electric vehicle's battery could not be repaired by charging afterwards.
    """
    idx = instance.index
    v = idx.vehicle_pos[vehicle]
    tasks = schedules(idx, partial).get(v, [])
    x = _task_index(idx, task)
    occupied = {(idx.pole_pos[p], s) for _, p, s in partial.charging_assignments}
    return _ledger_entry(idx, v, tasks, x, alpha, floor, occupied)


def _ledger_entry(idx, v, tasks, x, alpha, floor, occupied) -> float:
    cost = _biased(idx, v, tasks, x, alpha)
    if cost == INF or not idx.vehicle_electric[v]:
        return cost
    trial = insert_task(idx, tasks, x)
    if repair_charging(idx, v, trial, occupied, alpha, floor) is None:
        return INF
    return cost


def repair_charging(
    idx: InstanceIndex,
    v: int,
    tasks: list[int],
    occupied: set[tuple[int, int]],
    alpha: float,
    floor: float = EPS_KWH,
) -> list[int] | None:
    """Insert charging slots into an electric schedule until its levels clear ``floor``.

    Candidates are free, time-compatible slots ending no later than the first
    dip; they are ranked by added deadhead energy plus alpha times the layover
    around the slot, earliest slot first on ties. Returns the repaired task
    list, or None when no insertion sequence works.
    """
    cap = idx.vehicle_capacity[v] + EPS_KWH
    m = idx.vehicle_model[v]
    dh = idx.dh_energy_list[m]
    tasks = list(tasks)
    while True:
        lv = levels(idx, v, tasks)
        if any(x > cap for x in lv):
            return None
        dip = next((k for k, x in enumerate(lv) if x < floor), None)
        if dip is None:
            return tasks
        mask = -1
        for y in tasks:
            mask &= idx.compatible_mask[y]
        best = None
        for j in range(dip + 1):
            for p in range(idx.n_poles):
                if (p, j) in occupied or idx.pole_power[p][m] <= 0:
                    continue
                c = idx.charge_task(p, j)
                if not (mask >> c) & 1 or c in tasks:
                    continue
                trial = insert_task(idx, tasks, c)
                tl = levels(idx, v, trial)
                if tl[dip] <= lv[dip] or any(x > cap for x in tl):
                    continue
                pos = trial.index(c)
                prev = trial[pos - 1] if pos > 0 else -1
                nxt = trial[pos + 1] if pos + 1 < len(trial) else -1
                loc = idx.task_origin[c]
                added = 0.0
                wait = 0.0
                if prev >= 0:
                    added += dh[idx.task_dest[prev]][loc]
                    wait += idx.task_start[c] - idx.task_end[prev]
                if nxt >= 0:
                    added += dh[loc][idx.task_origin[nxt]]
                    wait += idx.task_start[nxt] - idx.task_end[c]
                if prev >= 0 and nxt >= 0:
                    added -= dh[idx.task_dest[prev]][idx.task_origin[nxt]]
                rank = (added + alpha * wait, j, p)
                if best is None or rank < best[0]:
                    best = (rank, trial)
        if best is None:
            return None
        tasks = best[1]


class _GreedyState:
    def __init__(self, instance: Instance, config: GreedyConfig):
        self.instance = instance
        self.idx = instance.index
        self.alpha = config.alpha
        self.floor = config.floor
        nv = len(self.idx.vehicle_ids)
        self.sched: list[list[int]] = [[] for _ in range(nv)]
        self.occupied: set[tuple[int, int]] = set()
        self.unassigned = set(range(self.idx.n_trips))
        self.ledger = np.full((nv, self.idx.n_trips), INF)

    def load(self, partial: Solution) -> None:
        for v, tasks in schedules(self.idx, partial).items():
            self.sched[v] = tasks
            for x in tasks:
                if x < self.idx.n_trips:
                    self.unassigned.discard(x)
                else:
                    self.occupied.add(self.idx.charge_of_task(x))

    def refresh_row(self, v: int) -> None:
        row = self.ledger[v]
        row[:] = INF
        for t in self.unassigned:
            row[t] = _ledger_entry(self.idx, v, self.sched[v], t, self.alpha, self.floor, self.occupied)

    def commit(self, v: int, t: int) -> None:
        idx = self.idx
        self.unassigned.discard(t)
        self.ledger[:, t] = INF
        self.sched[v] = insert_task(idx, self.sched[v], t)
        added = False
        if idx.vehicle_electric[v]:
            repaired = repair_charging(idx, v, self.sched[v], self.occupied, self.alpha, self.floor)
            if repaired is None:
                raise ChargingRepairFailed(idx.vehicle_ids[v])
            for x in repaired:
                if x >= idx.n_trips and x not in self.sched[v]:
                    self.occupied.add(idx.charge_of_task(x))
                    added = True
            self.sched[v] = repaired
        self.refresh_row(v)
        if added:
            # other electric rows depend on which slots are still free
            for u in range(len(self.sched)):
                if u != v and idx.vehicle_electric[u]:
                    self.refresh_row(u)

    def solution(self) -> Solution:
        idx = self.idx
        trips, charges = set(), set()
        for v, tasks in enumerate(self.sched):
            vid = idx.vehicle_ids[v]
            for x in tasks:
                if x < idx.n_trips:
                    trips.add((vid, idx.trip_ids[x]))
                else:
                    p, k = idx.charge_of_task(x)
                    charges.add((vid, idx.pole_ids[p], k))
        return Solution(frozenset(trips), frozenset(charges))

    def ledger_dict(self) -> CostLedger:
        idx = self.idx
        return {
            (idx.vehicle_ids[v], idx.trip_ids[t]): float(self.ledger[v, t])
            for v in range(len(self.sched))
            for t in sorted(self.unassigned)
        }


def update_after_assign(
    instance: Instance,
    partial: Solution,
    ledger: CostLedger,
    vehicle: str,
    task: Task,
    alpha: float,
    floor: float = 0.0,
) -> tuple[CostLedger, Solution]:
    """Refresh the ledger after ``task`` was committed to ``vehicle`` in ``partial``.

    Adds charging slots to an electric vehicle whose battery dips below the
    floor and invalidates ledger entries that the newly occupied slots affect.
    Raises ChargingRepairFailed when the dip cannot be repaired.
    """
    state = _GreedyState(instance, GreedyConfig(alpha, floor))
    idx = state.idx
    x = _task_index(idx, task)
    v = idx.vehicle_pos[vehicle]
    without = Solution(
        frozenset(a for a in partial.trip_assignments if not (a[0] == vehicle and a[1] == task.ref)),
        partial.charging_assignments,
    )
    state.load(without)
    for (vid, tid), val in ledger.items():
        state.ledger[idx.vehicle_pos[vid], idx.trip_pos[tid]] = val
    state.commit(v, x)
    return state.ledger_dict(), state.solution()


def greedy_assign(instance: Instance, config: GreedyConfig | None = None) -> Solution:
    """Assign every trip greedily by lowest biased cost.

    Ties go to the lexicographically smallest vehicle id, then trip id.
    Raises InfeasibleError naming the first trip that no vehicle can take.
    """
    config = config or GreedyConfig()
    state = _GreedyState(instance, config)
    idx = state.idx
    for v in range(len(state.sched)):
        state.refresh_row(v)
    while state.unassigned:
        flat = int(np.argmin(state.ledger))
        v, t = divmod(flat, idx.n_trips)
        if state.ledger[v, t] == INF:
            stuck = [u for u in state.unassigned if np.all(state.ledger[:, u] == INF)]
            first = min(stuck, key=idx.task_key)
            raise InfeasibleError(f"no vehicle can serve trip {idx.trip_ids[first]!r}", idx.trip_ids[first])
        try:
            state.commit(v, t)
        except ChargingRepairFailed as exc:
            raise InfeasibleError(str(exc), idx.trip_ids[t]) from exc
    return state.solution()

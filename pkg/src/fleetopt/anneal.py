"""Simulated annealing over trip swaps, seeded from the greedy solution.

A neighbor exchanges the late trips of two vehicles: every trip starting at or
after a random split time changes owner. The charging of both vehicles is
thrown away and rebuilt with the greedy repair. Worse neighbors are accepted
with probability exp(-delta / (delta_avg * tau)), where delta_avg is a running
mean of the accepted cost changes and tau follows a geometric schedule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InstanceValidationError, NeighborExhausted
from .feasibility import schedules, time_ok, validate_solution, vehicle_cost
from .greedy import GreedyConfig, greedy_assign, repair_charging
from .instance import Instance, InstanceIndex, Solution

# keeps the acceptance formula defined when the running mean collapses
MIN_DELTA_AVG = 1e-9


@dataclass(frozen=True)
class AnnealConfig:
    """Annealing parameters.

    The defaults were tuned on generated instances: 10000 iterations, start and
    end acceptance probabilities 0.7 and 0.001 for a unit-size move, and one
    swap round per fifty assignments.
    """

    k_max: int = 10000
    p_start: float = 0.7
    p_end: float = 0.001
    p_swap: float = 0.02
    seed: int = 0
    neighbor_retry_limit: int = 50

    def __post_init__(self):
        if not (isinstance(self.k_max, int) and self.k_max >= 2):
            raise ValueError("k_max must be an integer >= 2")
        for name in ("p_start", "p_end"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.p_end < self.p_start:
            raise ValueError("p_end must be smaller than p_start")
        if not 0.0 < self.p_swap <= 1.0:
            raise ValueError("p_swap must lie in (0, 1]")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.neighbor_retry_limit < 1:
            raise ValueError("neighbor_retry_limit must be positive")


@dataclass(frozen=True)
class Schedule:
    tau_start: float
    tau_end: float
    tau_rate: float

    @classmethod
    def from_config(cls, config: AnnealConfig) -> "Schedule":
        tau_start = -1.0 / math.log(config.p_start)
        tau_end = -1.0 / math.log(config.p_end)
        return cls(tau_start, tau_end, (tau_end / tau_start) ** (1.0 / (config.k_max - 1)))

    def tau(self, k: int) -> float:
        """Temperature at iteration k, counting from 1."""
        return self.tau_start * self.tau_rate ** (k - 1)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    tau: float
    delta_e: float | None  # None when no feasible neighbor was found
    accepted: bool
    best_cost: float


def accept_probability(delta_e: float, delta_avg: float, tau_k: float) -> float:
    if delta_avg <= 0 or tau_k <= 0:
        raise ValueError("delta_avg and tau_k must be positive")
    return math.exp(-delta_e / (delta_avg * tau_k))


def _split_trips(idx: InstanceIndex, tasks: list[int], split: float) -> tuple[list[int], list[int]]:
    keep, move = [], []
    for x in tasks:
        if x < idx.n_trips:
            (move if idx.task_start[x] >= split else keep).append(x)
    return keep, move


def _neighbor(
    idx: InstanceIndex,
    sched: list[list[int]],
    p_swap: float,
    rng: np.random.Generator,
    retry_limit: int,
    alpha: float,
    floor: float,
) -> dict[int, list[int]]:
    """Replacement schedules for the vehicles a random swap touched."""
    nv = len(sched)
    if nv < 2:
        raise NeighborExhausted("a swap needs at least two vehicles")
    n_assign = sum(len(t) for t in sched)
    rounds = max(1, int(n_assign * p_swap))
    g0, g1 = idx.slot_start[0], idx.slot_end[idx.n_slots - 1]
    for _ in range(retry_limit):
        new: dict[int, list[int]] = {}
        for _ in range(rounds):
            v1, v2 = (int(v) for v in rng.choice(nv, size=2, replace=False))
            split = rng.uniform(g0, g1)
            a = new.get(v1, sched[v1])
            b = new.get(v2, sched[v2])
            keep1, move1 = _split_trips(idx, a, split)
            keep2, move2 = _split_trips(idx, b, split)
            new[v1] = sorted(keep1 + move2, key=idx.task_key)
            new[v2] = sorted(keep2 + move1, key=idx.task_key)
        if _rebuild(idx, sched, new, alpha, floor):
            return new
    raise NeighborExhausted(f"no feasible neighbor in {retry_limit} draws")


def _rebuild(idx: InstanceIndex, sched, new: dict[int, list[int]], alpha: float, floor: float) -> bool:
    """Check time feasibility and recharge touched electric vehicles in place."""
    for tasks in new.values():
        if not time_ok(idx, tasks):
            return False
    occupied = {
        idx.charge_of_task(x)
        for v, tasks in enumerate(sched)
        if v not in new
        for x in tasks
        if x >= idx.n_trips
    }
    for v in sorted(new):
        if not idx.vehicle_electric[v]:
            continue
        repaired = repair_charging(idx, v, new[v], occupied, alpha, floor)
        if repaired is None:
            return False
        new[v] = repaired
        occupied.update(idx.charge_of_task(x) for x in repaired if x >= idx.n_trips)
    return True


def _to_sched(idx: InstanceIndex, solution: Solution) -> list[list[int]]:
    sched: list[list[int]] = [[] for _ in idx.vehicle_ids]
    for v, tasks in schedules(idx, solution).items():
        sched[v] = tasks
    return sched


def _to_solution(idx: InstanceIndex, sched: list[list[int]]) -> Solution:
    trips, charges = set(), set()
    for v, tasks in enumerate(sched):
        vid = idx.vehicle_ids[v]
        for x in tasks:
            if x < idx.n_trips:
                trips.add((vid, idx.trip_ids[x]))
            else:
                p, k = idx.charge_of_task(x)
                charges.add((vid, idx.pole_ids[p], k))
    return Solution(frozenset(trips), frozenset(charges))


def random_neighbor(
    instance: Instance,
    current: Solution,
    p_swap: float,
    rng: np.random.Generator,
    *,
    retry_limit: int = 50,
    greedy_config: GreedyConfig | None = None,
) -> Solution:
    """Swap late trips between random vehicle pairs and rebuild their charging.

    Raises NeighborExhausted when ``retry_limit`` consecutive candidates are
    time-infeasible or cannot be recharged.
    """
    gc = greedy_config or GreedyConfig()
    idx = instance.index
    sched = _to_sched(idx, current)
    new = _neighbor(idx, sched, p_swap, rng, retry_limit, gc.alpha, gc.floor)
    for v, tasks in new.items():
        sched[v] = tasks
    return _to_solution(idx, sched)


def anneal(
    instance: Instance,
    config: AnnealConfig | None = None,
    greedy_config: GreedyConfig | None = None,
    *,
    validate_each: bool = False,
    trace: list[TraceRow] | None = None,
) -> Solution:
    """Refine the greedy solution for exactly ``config.k_max`` iterations.

    Returns the cheapest accepted solution, the greedy start included. With
    ``validate_each`` every accepted solution is re-validated and an
    InstanceValidationError is raised on the first failure. When ``trace`` is
    a list, one TraceRow per iteration is appended to it.
    """
    config = config or AnnealConfig()
    gc = greedy_config or GreedyConfig()
    idx = instance.index
    rng = np.random.default_rng(config.seed)
    schedule = Schedule.from_config(config)

    start = greedy_assign(instance, gc)
    sched = _to_sched(idx, start)
    vcost = [vehicle_cost(idx, v, tasks) for v, tasks in enumerate(sched)]
    cost = math.fsum(vcost)
    best_cost, best_sched = cost, [list(t) for t in sched]
    n_accepted = 1
    delta_avg: float | None = None
    tau = schedule.tau_start

    for k in range(1, config.k_max + 1):
        accepted = False
        delta = None
        try:
            new = _neighbor(idx, sched, config.p_swap, rng, config.neighbor_retry_limit, gc.alpha, gc.floor)
        except NeighborExhausted:
            new = None
        if new is not None:
            new_vcost = {v: vehicle_cost(idx, v, tasks) for v, tasks in new.items()}
            delta = math.fsum(new_vcost.values()) - math.fsum(vcost[v] for v in new)
            if delta_avg is None:
                delta_avg = max(delta, MIN_DELTA_AVG)
            if delta < 0:
                accepted = True
            else:
                accepted = rng.random() < accept_probability(delta, delta_avg, tau)
            if accepted:
                delta_avg = max(delta_avg + (delta - delta_avg) / n_accepted, MIN_DELTA_AVG)
                n_accepted += 1
                for v, tasks in new.items():
                    sched[v] = tasks
                    vcost[v] = new_vcost[v]
                cost = math.fsum(vcost)
                if validate_each:
                    report = validate_solution(instance, _to_solution(idx, sched))
                    if not report.ok:
                        raise InstanceValidationError(f"iteration {k}: {report.violations[0].detail}")
                if cost < best_cost:
                    best_cost, best_sched = cost, [list(t) for t in sched]
        if trace is not None:
            trace.append(TraceRow(k, tau, delta, accepted, best_cost))
        tau *= schedule.tau_rate
    return _to_solution(idx, best_sched)


def write_trace(rows: list[TraceRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "tau", "delta_e", "accepted", "best_cost"])
        for r in rows:
            w.writerow([
                r.iteration,
                f"{r.tau:.6f}",
                "" if r.delta_e is None else f"{r.delta_e:.6f}",
                int(r.accepted),
                f"{r.best_cost:.6f}",
            ])

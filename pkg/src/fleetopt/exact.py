"""Depth-first branch-and-bound that certifies optimal assignments on tiny instances.

Trips are branched in chronological order. Each trip goes to a vehicle that
already runs a compatible chain or to the first unused vehicle of each
interchangeable class (same model, same initial charge). Charging is decided
per leaf by an exhaustive slot-by-slot search over every electric vehicle's
chain, jointly across vehicles so that no charging slot is double booked.

The bound at a node is the weighted energy of the partial chains plus, for
every remaining trip, its cheapest weighted energy over all vehicle classes.
When the deadhead energies obey the triangle inequality the bound also
includes each electric chain's minimum charging detour, which can only grow
as the chain is extended.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

from .errors import InfeasibleError, TimeLimitError
from .feasibility import EPS_KWH, vehicle_cost
from .instance import Instance, InstanceIndex, Solution

INF = math.inf


@dataclass(frozen=True)
class ExactResult:
    solution: Solution
    cost: float
    optimal: bool
    nodes_explored: int
    status: str  # "optimal" or "time_limit"

    def certificate(self) -> dict:
        return {
            "optimal": self.optimal,
            "nodes_explored": self.nodes_explored,
            "incumbent_cost": round(self.cost, 6),
        }

    def certificate_json(self) -> str:
        return json.dumps(self.certificate())


class _Timeout(Exception):
    pass


class ChargePlanner:
    """Exhaustive search over charging plans for one electric chain.

    A plan is a set of charging tasks; its detour is the deadhead energy of
    the merged schedule minus that of the bare trip chain.
    """

    def __init__(self, idx: InstanceIndex):
        self.idx = idx
        self.triangle = idx.triangle_inequality
        self._best_memo: dict[tuple, tuple[float, tuple[int, ...]] | None] = {}

    def _pole_options(self, m: int, j: int, occupied) -> list[int]:
        # free poles with the same location and power are interchangeable
        idx = self.idx
        out, seen = [], set()
        for p in range(idx.n_poles):
            if idx.pole_power[p][m] <= 0 or (p, j) in occupied:
                continue
            key = (idx.pole_location[p], idx.pole_power[p][m])
            if key in seen:
                continue
            seen.add(key)
            out.append(p)
        return out

    def search(self, v: int, chain: list[int], occupied, bound, on_plan) -> None:
        """Call ``on_plan(detour, charges)`` for every feasible plan.

        ``bound()`` is consulted for pruning: when the instance obeys the
        triangle inequality, partial plans whose closed detour already reaches
        the bound are cut.
        """
        idx = self.idx
        m = idx.vehicle_model[v]
        cap = idx.vehicle_capacity[v] + EPS_KWH
        init = idx.vehicle_initial[v]
        dh = idx.dh_energy_list[m]
        te = idx.trip_energy_list[m]
        n = idx.n_slots
        slot_end = idx.slot_end
        start, end = idx.task_start, idx.task_end
        orig, dest = idx.task_origin, idx.task_dest
        cmask = idx.compatible_mask
        slot_of_end = idx.slot_of_end
        nt = len(chain)
        prune = self.triangle
        net = [0.0] * n
        charges: list[int] = []

        def rec(j, ti, prev, prev_trip, gap_dh, closed, mask, level):
            # level is the battery after slot j - 2
            if j == n:
                lvl = level + net[n - 1] if n else level
                if n and not (EPS_KWH <= lvl <= cap):
                    return
                detour = closed + (gap_dh if charges and prev_trip >= 0 and prev != prev_trip else 0.0)
                on_plan(detour, tuple(charges))
                return
            options = [-1]
            if ti < nt:
                sj = idx.slot_start[j]
                if prev < 0 or end[prev] <= sj:
                    for p in self._pole_options(m, j, occupied):
                        c = idx.charge_task(p, j)
                        if (mask >> c) & 1:
                            options.append(c)
            for c in options:
                undo = []
                p_prev, p_ptrip, p_gap, p_closed, p_mask = prev, prev_trip, gap_dh, closed, mask
                ok = True
                if c >= 0:
                    if prev >= 0:
                        e = dh[dest[prev]][orig[c]]
                        k = slot_of_end(start[c])
                        net[k] -= e
                        undo.append((k, e))
                        gap_dh += e
                    pw = idx.pole_power[idx.charge_of_task(c)[0]][m]
                    net[j] += pw
                    undo.append((j, -pw))
                    mask &= cmask[c]
                    prev = c
                    charges.append(c)
                t_i = ti
                limit = slot_end[j]
                while t_i < nt and start[chain[t_i]] < limit:
                    t = chain[t_i]
                    if not (mask >> t) & 1:
                        ok = False
                        break
                    if prev >= 0:
                        e = dh[dest[prev]][orig[t]]
                        k = slot_of_end(start[t])
                        net[k] -= e
                        undo.append((k, e))
                        if prev != prev_trip:
                            # closing a charging gap (or the pre-first-trip gap)
                            direct = dh[dest[prev_trip]][orig[t]] if prev_trip >= 0 else 0.0
                            closed += gap_dh + e - direct
                    k = slot_of_end(end[t])
                    net[k] -= te[t]
                    undo.append((k, te[t]))
                    mask &= cmask[t]
                    prev = t
                    prev_trip = t
                    gap_dh = 0.0
                    t_i += 1
                if ok and j >= 1:
                    lvl = level + net[j - 1]
                    ok = EPS_KWH <= lvl <= cap
                else:
                    lvl = level
                if ok and prune and closed >= bound():
                    ok = False
                if ok:
                    rec(j + 1, t_i, prev, prev_trip, gap_dh, closed, mask, lvl if j >= 1 else level)
                for k, e in undo:
                    net[k] += e
                if c >= 0:
                    charges.pop()
                prev, prev_trip, gap_dh, closed, mask = p_prev, p_ptrip, p_gap, p_closed, p_mask

        rec(0, 0, -1, -1, 0.0, 0.0, -1, init)

    def best(self, v: int, chain: tuple[int, ...]) -> tuple[float, tuple[int, ...]] | None:
        """Cheapest plan for ``chain`` ignoring other vehicles, memoized by class."""
        idx = self.idx
        key = (idx.vehicle_model[v], idx.vehicle_initial[v], chain)
        if key in self._best_memo:
            return self._best_memo[key]
        found: list = [INF, None]

        def on_plan(detour, charges):
            if detour < found[0]:
                found[0] = detour
                found[1] = charges

        if self._no_charge_needed(v, chain):
            result = (0.0, ())
        else:
            self.search(v, list(chain), frozenset(), lambda: found[0], on_plan)
            result = None if found[1] is None else (found[0], found[1])
        self._best_memo[key] = result
        return result

    def _no_charge_needed(self, v: int, chain) -> bool:
        """Cheap sufficient test: the whole chain fits in the initial charge."""
        if not self.triangle:
            return False
        idx = self.idx
        m = idx.vehicle_model[v]
        dh = idx.dh_energy_list[m]
        te = idx.trip_energy_list[m]
        total = 0.0
        prev = -1
        for t in chain:
            if prev >= 0:
                total += dh[idx.task_dest[prev]][idx.task_origin[t]]
            total += te[t]
            prev = t
        return idx.vehicle_initial[v] - total >= EPS_KWH


def solve_exact(instance: Instance, time_limit_s: float = 60.0) -> ExactResult:
    """Minimum-cost complete feasible solution by branch-and-bound.

    Raises InfeasibleError when the exhausted search finds no feasible
    solution, and TimeLimitError when the limit hits before any incumbent.
    """
    if not time_limit_s > 0:
        raise ValueError("time_limit_s must be positive")
    idx = instance.index
    planner = ChargePlanner(idx)
    triangle = planner.triangle
    deadline = time.monotonic() + time_limit_s

    nv = len(idx.vehicle_ids)
    order = sorted(range(idx.n_trips), key=idx.task_key)
    weight = idx.vehicle_weight
    vmodel = idx.vehicle_model
    te = idx.trip_energy_list
    dh_lb = (idx.dh_energy if triangle else idx.dh_energy_closure).tolist()
    electric = idx.vehicle_electric

    classes: dict[tuple, list[int]] = {}
    for v in range(nv):
        classes.setdefault((vmodel[v], idx.vehicle_initial[v]), []).append(v)
    class_lists = [vs for _, vs in sorted(classes.items(), key=lambda kv: kv[1][0])]
    class_next = [0] * len(class_lists)

    best_trip_cost = [min(weight[v] * te[vmodel[v]][t] for v in range(nv)) for t in range(idx.n_trips)]
    rest_lb = [0.0] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        rest_lb[i] = rest_lb[i + 1] + best_trip_cost[order[i]]

    chains: list[list[int]] = [[] for _ in range(nv)]
    masks = [-1] * nv
    detour_lb = [0.0] * nv
    incumbent = {"cost": INF, "sched": None}
    nodes = [0]

    def leaf(base: float) -> None:
        evs = [v for v in range(nv) if electric[v] and chains[v]]
        if not evs:
            _record(base, {})
            return
        budget = incumbent["cost"] - base
        plans = {}
        for v in evs:
            plans[v] = planner.best(v, tuple(chains[v]))
        if sum(weight[v] * plans[v][0] for v in evs) >= budget and triangle:
            return
        slots = [idx.charge_of_task(c) for v in evs for c in plans[v][1]]
        if len(slots) == len(set(slots)):
            detour = sum(weight[v] * plans[v][0] for v in evs)
            if detour < budget:
                _record(base + detour, {v: plans[v][1] for v in evs})
            return
        _joint_repair(evs, base)

    def _joint_repair(evs: list[int], base: float) -> None:
        rest = [0.0] * (len(evs) + 1)
        for i in range(len(evs) - 1, -1, -1):
            rest[i] = rest[i + 1] + (weight[evs[i]] * planner.best(evs[i], tuple(chains[evs[i]]))[0]
                                     if triangle else 0.0)
        chosen: dict[int, tuple[int, ...]] = {}

        def go(i: int, occupied: frozenset, acc: float) -> None:
            if time.monotonic() > deadline:
                raise _Timeout
            if i == len(evs):
                if base + acc < incumbent["cost"]:
                    _record(base + acc, dict(chosen))
                return
            v = evs[i]
            w = weight[v]

            def bound():
                if w == 0:
                    return INF
                return (incumbent["cost"] - base - acc - rest[i + 1]) / w

            def on_plan(detour, charges):
                total = acc + w * detour
                if base + total + rest[i + 1] >= incumbent["cost"] and triangle:
                    return
                chosen[v] = charges
                go(i + 1, occupied | {idx.charge_of_task(c) for c in charges}, total)
                chosen.pop(v, None)

            planner.search(v, list(chains[v]), occupied, bound, on_plan)

        go(0, frozenset(), 0.0)

    def _record(cost: float, plans: dict[int, tuple[int, ...]]) -> None:
        sched = {}
        for v in range(nv):
            if chains[v]:
                tasks = list(chains[v]) + list(plans.get(v, ()))
                tasks.sort(key=idx.task_key)
                sched[v] = tasks
        # recompute through the shared cost function to avoid drift
        exact_cost = sum(vehicle_cost(idx, v, tasks) for v, tasks in sorted(sched.items()))
        if exact_cost < incumbent["cost"]:
            incumbent["cost"] = exact_cost
            incumbent["sched"] = sched

    def dfs(i: int, cost: float) -> None:
        nodes[0] += 1
        if nodes[0] % 512 == 0 and time.monotonic() > deadline:
            raise _Timeout
        if i == len(order):
            # the running cost carries the detour bounds; leaves price charging exactly
            leaf(cost - sum(detour_lb))
            return
        t = order[i]
        children = []
        for v in range(nv):
            if chains[v] and (masks[v] >> t) & 1:
                m = vmodel[v]
                last = chains[v][-1]
                inc = weight[v] * (te[m][t] + dh_lb[m][idx.task_dest[last]][idx.task_origin[t]])
                children.append((inc, v, False))
        for ci, vs in enumerate(class_lists):
            if class_next[ci] < len(vs):
                v = vs[class_next[ci]]
                children.append((weight[v] * te[vmodel[v]][t], v, True))
        children.sort(key=lambda c: (c[0], c[1]))
        rest = rest_lb[i + 1]
        for inc, v, fresh in children:
            if cost + inc + rest >= incumbent["cost"]:
                break
            extra = 0.0
            new_chain = chains[v] + [t]
            if electric[v]:
                plan = planner.best(v, tuple(new_chain))
                if plan is None:
                    continue
                if triangle:
                    extra = weight[v] * plan[0] - detour_lb[v]
                    if cost + inc + extra + rest >= incumbent["cost"]:
                        continue
            old_mask, old_detour = masks[v], detour_lb[v]
            chains[v].append(t)
            masks[v] &= idx.compatible_mask[t]
            detour_lb[v] += extra
            if fresh:
                ci = next(k for k, vs in enumerate(class_lists) if v in vs)
                class_next[ci] += 1
            dfs(i + 1, cost + inc + extra)
            if fresh:
                class_next[ci] -= 1
            chains[v].pop()
            masks[v] = old_mask
            detour_lb[v] = old_detour

    status = "optimal"
    try:
        dfs(0, 0.0)
    except _Timeout:
        status = "time_limit"
    if incumbent["sched"] is None:
        if status == "time_limit":
            raise TimeLimitError(f"no feasible solution found within {time_limit_s} s")
        raise InfeasibleError("exhausted search: no feasible assignment exists")
    return ExactResult(
        _to_solution(idx, incumbent["sched"]),
        incumbent["cost"],
        status == "optimal",
        nodes[0],
        status,
    )


def _to_solution(idx: InstanceIndex, sched: dict[int, list[int]]) -> Solution:
    trips, charges = set(), set()
    for v, tasks in sched.items():
        vid = idx.vehicle_ids[v]
        for x in tasks:
            if x < idx.n_trips:
                trips.add((vid, idx.trip_ids[x]))
            else:
                p, k = idx.charge_of_task(x)
                charges.add((vid, idx.pole_ids[p], k))
    return Solution(frozenset(trips), frozenset(charges))

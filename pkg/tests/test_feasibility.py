import json
from dataclasses import replace

import numpy as np
import pytest
from builders import build
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetopt.errors import InfeasibleError, InstanceValidationError
from fleetopt.feasibility import (
    Task,
    battery_profile,
    charging_task,
    pair_feasible,
    solution_cost,
    trip_task,
    validate_solution,
)
from fleetopt.generator import random_instance
from fleetopt.greedy import greedy_assign
from fleetopt.instance import CostParams, Solution


def sol(trips=(), charges=()):
    return Solution(frozenset(trips), frozenset(charges))


# ---------------------------------------------------------------- pair_feasible


def test_zero_deadhead_boundary_is_feasible():
    inst = build(trips=(("t1", "l", "l", 0, 600),), locations=("l",))
    x1 = Task("trip", "a", None, 0, 1000, "l", "l")
    x2 = Task("trip", "b", None, 1000, 2000, "l", "l")
    assert pair_feasible(inst, x1, x2)


def test_one_second_short():
    inst = build(deadhead={("A", "B"): (101, 0.0)})
    x1 = Task("trip", "a", None, 0, 900, "B", "A")
    x2 = Task("trip", "b", None, 1000, 2000, "B", "B")
    assert not pair_feasible(inst, x1, x2)


def test_trip_then_charging_slot():
    inst = build(
        trips=(("t1", "A", "stopB", 30000, 32400),),
        locations=("A", "stopB", "depot"),
        poles=(("P1", "depot", 40.0),),
        grid=(0, 86400, 1800),
        deadhead={("stopB", "depot"): (1500, 1.0)},
    )
    slot = charging_task(inst, "P1", 19)
    assert slot.start_s == 34200
    assert pair_feasible(inst, trip_task(inst, "t1"), slot)


@given(st.integers(0, 5000), st.integers(0, 3000))
def test_pair_feasible_monotone_in_slack(start, bump):
    inst = build(deadhead={("B", "A"): (700, 0.0)})
    x1 = Task("trip", "a", None, 0, 900, "A", "B")
    x2 = Task("trip", "b", None, start, start + 10, "A", "A")
    later = Task("trip", "b", None, start + bump, start + bump + 10, "A", "A")
    if pair_feasible(inst, x1, x2):
        assert pair_feasible(inst, x1, later)


# ---------------------------------------------------------------- battery ledger


def test_empty_profile():
    inst = build(vehicles=(("E1", "E", 42.0),))
    prof = battery_profile(inst, sol(), "E1")
    assert np.all(prof.used_kwh == 0)
    assert np.all(prof.charged_kwh == 42.0)


def test_deadhead_booked_at_successor_start():
    # charge at A in slot 0, deadhead A->B (1 kWh), trip B->C starting in slot 2, ending in slot 3
    inst = build(
        vehicles=(("E1", "E", 50.0),),
        trips=(("t1", "B", "C", 8000, 12000),),
        locations=("A", "B", "C"),
        poles=(("P1", "A", 10.0),),
        energy={("t1", "E"): 12.0},
        deadhead={("A", "B"): (600, 1.0)},
    )
    prof = battery_profile(inst, sol([("E1", "t1")], [("E1", "P1", 0)]), "E1")
    assert prof.used_kwh[1] == 0.0
    assert prof.used_kwh[2] == 1.0
    assert prof.used_kwh[3] == 13.0


def test_charged_increments_at_slot_end():
    inst = build(vehicles=(("E1", "E", 20.0),), poles=(("P1", "A", 45.0),))
    prof = battery_profile(inst, sol([("E1", "t1")], [("E1", "P1", 5)]), "E1")
    assert prof.charged_kwh[4] == 20.0
    assert prof.charged_kwh[5] == 65.0
    assert np.allclose(prof.level_kwh, prof.charged_kwh - prof.used_kwh)


def test_profile_rejects_unknown_vehicle():
    with pytest.raises(InstanceValidationError):
        battery_profile(build(), sol([("nope", "t1")]), "nope")


# ---------------------------------------------------------------- validation


def test_time_infeasible_pair_reported_once():
    inst = build(trips=(("t1", "A", "B", 0, 1000), ("t2", "A", "B", 900, 2000)))
    rep = validate_solution(inst, sol([("D1", "t1"), ("D1", "t2")]))
    assert [v.kind for v in rep] == ["time_infeasible_pair"]


def test_underflow_at_trip_end_slot():
    inst = build(
        vehicles=(("E1", "E", 10.0),),
        trips=(("t1", "A", "B", 3600, 10000),),
        energy={("t1", "E"): 12.0},
    )
    rep = validate_solution(inst, sol([("E1", "t1")]))
    assert [(v.kind, v.slot) for v in rep] == [("battery_underflow", 2)]


def test_every_violation_kind_is_reachable():
    inst = build(
        vehicles=(("E1", "E", 95.0), ("E2", "E", 50.0), ("D1", "D", 0.0)),
        trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 300, 900), ("t3", "A", "B", 4000, 5000)),
        poles=(("P1", "A", 40.0),),
    )
    bad = sol(
        [("E1", "t1"), ("E2", "t1"), ("E1", "t2")],
        [("E1", "P1", 0), ("D1", "P1", 3), ("E2", "P1", 9)],
    )
    kinds = validate_solution(inst, bad).kinds()
    assert kinds == {
        "unassigned_trip",
        "double_assigned_trip",
        "time_infeasible_pair",
        "battery_overflow",
        "liquid_vehicle_charging",
    }
    # dangling ids are reported on their own, before any ledger is evaluated
    ghost = sol([("E1", "t1"), ("ghost", "t2")], [("E1", "P9", 2)])
    assert [v.kind for v in validate_solution(inst, ghost)] == ["unknown_reference"] * 2
    clash = sol([("E1", "t1"), ("E2", "t3")], [("E1", "P1", 5), ("E2", "P1", 5)])
    assert "slot_conflict" in validate_solution(inst, clash).kinds()
    empty = build(vehicles=(("E1", "E", 5.0),), energy={("t1", "E"): 5.0})
    assert validate_solution(empty, sol([("E1", "t1")])).kinds() == {"battery_underflow"}


def test_report_json_shape():
    inst = build(trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 0, 600)))
    rep = validate_solution(inst, sol([("D1", "t1")]))
    doc = json.loads(rep.to_json())
    assert doc == [{"kind": "unassigned_trip", "detail": "trip 't2' has no vehicle", "trip": "t2"}]
    assert not validate_solution(build(), sol([("D1", "t1")]))


# ---------------------------------------------------------------- cost


def test_cost_examples():
    assert solution_cost(build(), sol()) == 0.0
    one = build(energy={("t1", "D"): 20.0})
    assert solution_cost(one, sol([("D1", "t1")])) == 20.0
    two = build(
        vehicles=(("E1", "E", 100.0),),
        trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 3600, 4200)),
        energy={("t1", "E"): 10.0, ("t2", "E"): 11.0},
        deadhead={("B", "A"): (600, 1.5)},
        k_elec=0.25,
    )
    assert solution_cost(two, sol([("E1", "t1"), ("E1", "t2")])) == pytest.approx(5.625)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_cost_additive_and_scale_covariant(seed, lam):
    inst = random_instance(seed, n_vehicles=3, n_trips=5)
    try:
        s = greedy_assign(inst)
    except InfeasibleError:
        return
    total = solution_cost(inst, s)
    parts = sum(solution_cost(inst, s.restricted_to(v.id)) for v in inst.vehicles)
    assert total == pytest.approx(parts, rel=1e-12)
    scaled = replace(inst, cost_params=CostParams(inst.cost_params.k_gas * lam, inst.cost_params.k_elec * lam))
    assert solution_cost(scaled, s) == pytest.approx(lam * total, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_profile_monotone_for_arbitrary_solutions(seed, data):
    inst = random_instance(seed, n_vehicles=2, n_trips=4, n_slots=3)
    vids = [v.id for v in inst.vehicles]
    trips = [(data.draw(st.sampled_from(vids)), t.id) for t in inst.trips]
    charges = [
        (data.draw(st.sampled_from(vids)), p.id, s)
        for p in inst.charging_poles
        for s in range(inst.slot_grid.n_slots)
        if data.draw(st.booleans())
    ]
    s = sol(trips, charges)
    for v in inst.vehicles:
        if inst.is_electric(v.id):
            prof = battery_profile(inst, s, v.id)
            assert np.all(np.diff(prof.used_kwh) >= 0)
            assert np.all(np.diff(prof.charged_kwh) >= 0)

import math

import pytest
from builders import build
from conftest import DATA
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetopt.errors import ChargingRepairFailed, InfeasibleError
from fleetopt.feasibility import charging_task, schedules, solution_cost, trip_task, validate_solution
from fleetopt.generator import random_instance
from fleetopt.greedy import GreedyConfig, biased_cost, greedy_assign, repair_charging, update_after_assign
from fleetopt.instance import Solution, load_instance


def sol(trips=(), charges=()):
    return Solution(frozenset(trips), frozenset(charges))


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        GreedyConfig(alpha=math.inf)
    with pytest.raises(ValueError):
        GreedyConfig(alpha=-1)
    with pytest.raises(ValueError):
        GreedyConfig(charging_safety_floor_kwh=-0.5)


def test_biased_cost_empty_vehicle():
    inst = build(energy={("t1", "D"): 5.0})
    assert biased_cost(inst, sol(), "D1", trip_task(inst, "t1"), 0.001) == 5.0


def test_biased_cost_zero_gap():
    inst = build(
        trips=(("t0", "A", "B", 0, 600), ("t1", "B", "A", 600, 1200)),
        energy={("t1", "D"): 5.0},
    )
    assert biased_cost(inst, sol([("D1", "t0")]), "D1", trip_task(inst, "t1"), 0.001) == 5.0


def test_biased_cost_hand_evaluation():
    inst = build(
        trips=(("t0", "A", "B", 0, 1000), ("t1", "A", "B", 1600, 2000)),
        energy={("t1", "D"): 5.0},
        deadhead={("B", "A"): (300, 1.0)},
    )
    assert biased_cost(inst, sol([("D1", "t0")]), "D1", trip_task(inst, "t1"), 0.001) == pytest.approx(6.6)


def test_biased_cost_counts_successor_and_clash():
    inst = build(
        trips=(("t0", "A", "B", 0, 1000), ("t1", "A", "B", 1600, 2000), ("t2", "A", "B", 1900, 2500)),
        energy={("t0", "D"): 5.0},
        deadhead={("B", "A"): (300, 1.0)},
    )
    # t0 placed before t1: successor deadhead 1.0 plus 600 s of waiting
    assert biased_cost(inst, sol([("D1", "t1")]), "D1", trip_task(inst, "t0"), 0.001) == pytest.approx(6.6)
    assert biased_cost(inst, sol([("D1", "t1")]), "D1", trip_task(inst, "t2"), 0.001) == math.inf


def test_two_trips_on_one_diesel():
    inst = build(
        trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 3600, 4200)),
        energy={("t1", "D"): 10.0, ("t2", "D"): 12.0},
        deadhead={("B", "A"): (600, 2.0)},
    )
    s = greedy_assign(inst)
    assert s == sol([("D1", "t1"), ("D1", "t2")])
    assert solution_cost(inst, s) == 24.0


def test_cheaper_electric_vehicle_wins():
    inst = build(
        vehicles=(("E1", "E", 10.0), ("D1", "D", 0.0)),
        energy={("t1", "E"): 4.0, ("t1", "D"): 8.0},
        capacity=10.0,
    )
    assert greedy_assign(inst) == sol([("E1", "t1")])


def test_pigeonhole_names_second_trip():
    inst = build(trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 0, 600)))
    with pytest.raises(InfeasibleError) as err:
        greedy_assign(inst)
    assert err.value.trip == "t2"


def test_ties_go_to_smallest_vehicle_id():
    inst = build(vehicles=(("D2", "D", 0.0), ("D1", "D", 0.0)))
    assert greedy_assign(inst) == sol([("D1", "t1")])


def test_charging_inserted_on_dip():
    # 20 kWh battery, two 12 kWh trips: one 45 kWh slot between them fixes the ledger
    inst = build(
        vehicles=(("E1", "E", 20.0),),
        trips=(("t1", "A", "B", 0, 3600), ("t2", "A", "B", 10800, 14400)),
        energy={("t1", "E"): 12.0, ("t2", "E"): 12.0},
        poles=(("P1", "A", 45.0),),
        capacity=60.0,
    )
    s = greedy_assign(inst)
    assert validate_solution(inst, s).ok
    assert s.charges_of("E1") == [("P1", 1)]


def test_update_after_assign_liquid_branch():
    inst = build(
        vehicles=(("D1", "D", 0.0), ("D2", "D", 0.0)),
        trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 300, 900)),
    )
    ledger = {(v, t): 10.0 for v in ("D1", "D2") for t in ("t1", "t2")}
    new, partial = update_after_assign(inst, sol([("D1", "t1")]), ledger, "D1", trip_task(inst, "t1"), 0.0)
    assert partial == sol([("D1", "t1")])
    assert new[("D1", "t2")] == math.inf
    assert new[("D2", "t2")] == 10.0


def test_update_after_assign_repairs_dip():
    inst = build(
        vehicles=(("E1", "E", 10.0),),
        trips=(("t1", "A", "B", 7200, 9000),),
        energy={("t1", "E"): 12.0},
        poles=(("P1", "A", 45.0),),
    )
    new, partial = update_after_assign(inst, sol([("E1", "t1")]), {("E1", "t1"): 12.0}, "E1", trip_task(inst, "t1"), 0.0)
    assert partial.charges_of("E1") == [("P1", 0)]
    assert validate_solution(inst, partial).ok
    assert new == {}


def test_update_after_assign_fails_when_every_slot_clashes():
    inst = build(
        vehicles=(("E1", "E", 10.0),),
        trips=(("t1", "A", "B", 0, 9000),),
        energy={("t1", "E"): 12.0},
        poles=(("P1", "A", 45.0),),
    )
    with pytest.raises(ChargingRepairFailed):
        update_after_assign(inst, sol([("E1", "t1")]), {("E1", "t1"): 12.0}, "E1", trip_task(inst, "t1"), 0.0)


def test_repair_returns_none_without_candidates():
    inst = build(vehicles=(("E1", "E", 10.0),), energy={("t1", "E"): 12.0})
    idx = inst.index
    assert repair_charging(idx, 0, [0], set(), 0.0) is None


def test_single_vehicle_zero_alpha_regression():
    inst = build(
        trips=(("t1", "A", "B", 0, 600), ("t2", "B", "C", 1800, 2400), ("t3", "C", "A", 3600, 4200)),
        locations=("A", "B", "C"),
        energy={("t1", "D"): 3.0, ("t2", "D"): 1.0, ("t3", "D"): 2.0},
        default_deadhead=(300, 4.0),
    )
    s = greedy_assign(inst, GreedyConfig(alpha=0.0))
    assert s.trips_of("D1") == ["t1", "t2", "t3"]
    assert solution_cost(inst, s) == 6.0


GOLDEN_GREEDY_COST = 74.7899524760589


def test_charging_slot_has_zero_base_cost():
    inst = build(vehicles=(("E1", "E", 50.0),), poles=(("P1", "A", 10.0),))
    assert biased_cost(inst, sol(), "E1", charging_task(inst, "P1", 3), 0.001) == 0.0


def test_golden_greedy_snapshot():
    inst = load_instance(DATA / "line3.json")
    s = greedy_assign(inst)
    assert validate_solution(inst, s).ok
    assert greedy_assign(inst) == s
    assert solution_cost(inst, s) == pytest.approx(GOLDEN_GREEDY_COST, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_greedy_output_always_valid(seed):
    inst = random_instance(seed, n_vehicles=3, n_trips=6, n_slots=4, n_poles=2)
    try:
        s = greedy_assign(inst)
    except InfeasibleError:
        return
    assert validate_solution(inst, s).ok
    per_vehicle = schedules(inst.index, s)
    assert sum(len(t) for t in per_vehicle.values()) == len(s)

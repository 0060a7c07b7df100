import json
import math

import pytest
from builders import build
from oracles import brute_force_optimum

from fleetopt.anneal import AnnealConfig, anneal
from fleetopt.errors import InfeasibleError, TimeLimitError
from fleetopt.exact import solve_exact
from fleetopt.feasibility import solution_cost, validate_solution
from fleetopt.generator import generate_instance, random_instance
from fleetopt.greedy import greedy_assign
from fleetopt.instance import Solution

# brute-force optima, frozen from tests/oracles.py (inf = no feasible solution)
DEFAULT_SHAPE = {
    0: 23.428473, 1: math.inf, 2: math.inf, 3: 81.2859456, 4: math.inf,
    5: math.inf, 6: math.inf, 7: 53.3189886, 8: math.inf, 9: 20.8191412,
}
TWO_LOCATIONS = {
    7: 33.7694792, 11: 22.925988, 13: 81.783091, 16: 45.539021, 24: 34.2732585,
    25: 51.5446902, 30: 16.4682164, 33: 12.3236306, 35: 14.5599084, 36: 19.6366739,
}
METRIC = {101: 30.46961122279697, 102: 52.0379844, 103: 28.826639124335458, 104: 48.08840902083857}


def check_against(inst, expected):
    if expected == math.inf:
        with pytest.raises(InfeasibleError):
            solve_exact(inst)
        return
    res = solve_exact(inst)
    assert res.optimal and res.status == "optimal"
    assert validate_solution(inst, res.solution).ok
    assert res.cost == pytest.approx(expected, rel=1e-9)
    assert solution_cost(inst, res.solution) == pytest.approx(res.cost, rel=1e-12)


@pytest.mark.parametrize("seed", sorted(DEFAULT_SHAPE))
def test_matches_enumeration_default_shape(seed):
    check_against(random_instance(seed), DEFAULT_SHAPE[seed])


@pytest.mark.parametrize("seed", sorted(TWO_LOCATIONS))
def test_matches_enumeration_feasible_seeds(seed):
    check_against(random_instance(seed, n_vehicles=2, n_trips=4, n_slots=2, n_locations=2), TWO_LOCATIONS[seed])


@pytest.mark.parametrize("seed", sorted(METRIC))
def test_matches_enumeration_metric(seed):
    inst = random_instance(seed, n_vehicles=3, n_trips=5, n_slots=3, metric=True)
    check_against(inst, METRIC[seed])


def test_oracle_agrees_on_a_fresh_instance():
    inst = random_instance(4242, n_vehicles=2, n_trips=3, n_slots=3, n_poles=1)
    expected = brute_force_optimum(inst)
    check_against(inst, expected)


def test_single_vehicle_two_trips():
    inst = build(
        trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 3600, 4200)),
        energy={("t1", "D"): 10.0, ("t2", "D"): 12.0},
        deadhead={("B", "A"): (600, 2.0)},
    )
    res = solve_exact(inst)
    assert res.solution == Solution(frozenset({("D1", "t1"), ("D1", "t2")}))
    assert res.cost == 24.0


def test_cheap_ev_with_charging():
    inst = build(
        vehicles=(("D1", "D", 0.0), ("E1", "E", 5.0)),
        trips=(("t1", "A", "B", 7200, 9000),),
        energy={("t1", "E"): 12.0, ("t1", "D"): 30.0},
        poles=(("P1", "A", 45.0),),
        k_elec=0.5,
    )
    res = solve_exact(inst)
    assert res.optimal
    assert res.solution.trips_of("E1") == ["t1"]
    assert res.solution.charges_of("E1")
    assert res.cost == 6.0


def test_certificate_json():
    res = solve_exact(build())
    doc = json.loads(res.certificate_json())
    assert doc == {"optimal": True, "nodes_explored": res.nodes_explored, "incumbent_cost": 1.0 * res.cost}
    assert doc["nodes_explored"] >= 1


def test_infeasible_after_exhaustive_search():
    inst = build(trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 0, 600)))
    with pytest.raises(InfeasibleError):
        solve_exact(inst)


def test_time_limit_keeps_incumbent():
    inst = generate_instance(3, 10, 3, 5, 7)
    res = solve_exact(inst, time_limit_s=0.5)
    assert not res.optimal and res.status == "time_limit"
    assert validate_solution(inst, res.solution).ok


def test_time_limit_without_incumbent():
    inst = generate_instance(12, 10, 3, 5, 1)
    with pytest.raises(TimeLimitError):
        solve_exact(inst, time_limit_s=1e-6)


def test_rejects_non_positive_limit():
    with pytest.raises(ValueError):
        solve_exact(build(), time_limit_s=0)


@pytest.mark.parametrize("seed", range(5))
def test_exact_bounds_heuristics(seed):
    inst = generate_instance(1, 10, 3, 5, seed)
    res = solve_exact(inst, time_limit_s=30)
    assert res.optimal
    assert res.cost <= solution_cost(inst, greedy_assign(inst)) + 1e-9
    sa = anneal(inst, AnnealConfig(k_max=300, seed=seed))
    assert res.cost <= solution_cost(inst, sa) + 1e-9

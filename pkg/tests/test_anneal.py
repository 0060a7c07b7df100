import math
from collections import Counter

import numpy as np
import pytest
from builders import build
from conftest import DATA
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetopt.anneal import (
    AnnealConfig,
    Schedule,
    TraceRow,
    accept_probability,
    anneal,
    random_neighbor,
    write_trace,
)
from fleetopt.errors import InfeasibleError, NeighborExhausted
from fleetopt.feasibility import solution_cost, validate_solution
from fleetopt.generator import random_instance
from fleetopt.greedy import greedy_assign
from fleetopt.instance import Solution, load_instance


def sol(trips=(), charges=()):
    return Solution(frozenset(trips), frozenset(charges))


def four_trips():
    return build(
        vehicles=(("D1", "D", 0.0), ("D2", "D", 0.0)),
        trips=(
            ("a1", "A", "A", 3600, 7200),
            ("a2", "A", "A", 54000, 57600),
            ("b1", "A", "A", 3600, 7200),
            ("b2", "A", "A", 54000, 57600),
        ),
        locations=("A",),
    )


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(k_max=1),
        dict(p_start=1.0),
        dict(p_end=0.0),
        dict(p_start=0.1, p_end=0.2),
        dict(p_swap=0.0),
        dict(p_swap=1.5),
        dict(neighbor_retry_limit=0),
        dict(seed=2**64),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        AnnealConfig(**kwargs)


def test_accept_probability_closed_forms():
    assert accept_probability(0.0, 1.0, 1.0) == 1.0
    assert accept_probability(3.0, 3.0, 1.0) == pytest.approx(math.exp(-1))
    assert accept_probability(3.0, 3.0, 1.0) == pytest.approx(0.3679, abs=1e-4)
    assert accept_probability(2.0, 1.0, 0.5) == pytest.approx(0.0183, abs=1e-4)
    with pytest.raises(ValueError):
        accept_probability(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        accept_probability(1.0, 1.0, -1.0)


def test_schedule_endpoints():
    cfg = AnnealConfig(k_max=500)
    s = Schedule.from_config(cfg)
    assert s.tau_start == pytest.approx(2.80367, abs=1e-5)
    assert s.tau(1) == s.tau_start
    assert s.tau(cfg.k_max) == pytest.approx(s.tau_end, rel=1e-9)
    taus = [s.tau(k) for k in range(1, cfg.k_max + 1)]
    assert all(a > b for a, b in zip(taus, taus[1:]))


def test_trace_tau_closes_on_tau_end():
    inst = four_trips()
    rows: list[TraceRow] = []
    cfg = AnnealConfig(k_max=300, seed=3)
    anneal(inst, cfg, trace=rows)
    sched = Schedule.from_config(cfg)
    assert len(rows) == 300
    assert rows[0].tau == sched.tau_start
    assert rows[-1].tau == pytest.approx(sched.tau_end, rel=1e-9)


def test_two_vehicles_always_swap_with_each_other():
    inst = four_trips()
    start = sol([("D1", "a1"), ("D1", "a2"), ("D2", "b1"), ("D2", "b2")])
    rng = np.random.default_rng(0)
    for _ in range(20):
        nb = random_neighbor(inst, start, 0.02, rng)
        assert Counter(t for _, t in nb.trip_assignments) == Counter(["a1", "a2", "b1", "b2"])
        assert {v for v, _ in nb.trip_assignments} == {"D1", "D2"}


def test_midday_split_exchanges_late_trips():
    inst = four_trips()
    start = sol([("D1", "a1"), ("D1", "a2"), ("D2", "b1"), ("D2", "b2")])
    seen = set()
    rng = np.random.default_rng(1)
    for _ in range(50):
        seen.add(random_neighbor(inst, start, 0.02, rng))
    # either nothing moved (split after both pairs), only late trips swapped, or all four swapped
    assert sol([("D1", "a1"), ("D1", "b2"), ("D2", "b1"), ("D2", "a2")]) in seen
    assert seen <= {
        start,
        sol([("D1", "a1"), ("D1", "b2"), ("D2", "b1"), ("D2", "a2")]),
        sol([("D1", "b1"), ("D1", "b2"), ("D2", "a1"), ("D2", "a2")]),
    }


def test_single_vehicle_has_no_neighbor():
    inst = build()
    with pytest.raises(NeighborExhausted):
        random_neighbor(inst, sol([("D1", "t1")]), 0.02, np.random.default_rng(0))
    assert anneal(inst, AnnealConfig(k_max=2)) == greedy_assign(inst)


def test_exhausted_neighbor_counts_as_rejection():
    # two identical simultaneous trips: every swap collides or is a no-op
    inst = build(
        vehicles=(("D1", "D", 0.0), ("D2", "D", 0.0)),
        trips=(("t1", "A", "B", 0, 600), ("t2", "A", "B", 0, 600)),
    )
    rows = []
    out = anneal(inst, AnnealConfig(k_max=20, neighbor_retry_limit=2), trace=rows)
    assert validate_solution(inst, out).ok
    assert len(rows) == 20


def test_deterministic_for_seed():
    inst = load_instance(DATA / "line3.json")
    cfg = AnnealConfig(k_max=400, seed=11)
    r1, r2 = [], []
    a = anneal(inst, cfg, trace=r1)
    b = anneal(inst, cfg, trace=r2)
    assert a == b
    assert r1 == r2


def test_golden_anneal_snapshot(tmp_path):
    inst = load_instance(DATA / "line3.json")
    rows = []
    out = anneal(inst, AnnealConfig(k_max=400, seed=11), validate_each=True, trace=rows)
    assert validate_solution(inst, out).ok
    assert solution_cost(inst, out) == pytest.approx(GOLDEN_ANNEAL_COST, rel=1e-9)
    assert solution_cost(inst, out) <= solution_cost(inst, greedy_assign(inst))
    path = tmp_path / "trace.csv"
    write_trace(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,tau,delta_e,accepted,best_cost"
    assert len(lines) == 401
    assert lines[1].startswith("1,2.803673,")


GOLDEN_ANNEAL_COST = 74.7899524760589


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_anneal_never_worse_than_greedy(seed):
    inst = random_instance(seed, n_vehicles=3, n_trips=6, n_slots=4, n_poles=2)
    try:
        g = greedy_assign(inst)
    except InfeasibleError:
        return
    out = anneal(inst, AnnealConfig(k_max=60, seed=seed, p_swap=0.3), validate_each=True)
    assert validate_solution(inst, out).ok
    assert solution_cost(inst, out) <= solution_cost(inst, g) + 1e-9
    assert sorted(t for _, t in out.trip_assignments) == sorted(t.id for t in inst.trips)

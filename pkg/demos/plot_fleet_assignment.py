"""
Assigning trips and charging to a mixed fleet
=============================================

A synthetic two-line network with three electric buses and a pool of diesel
buses. We build the greedy assignment, refine it with simulated annealing and
compare both against the branch-and-bound optimum.
"""

# %%
# Build an instance
# -----------------
# ``generate_instance(lines, trips_per_line, evs, icev_factor, seed)`` is fully
# deterministic, so the numbers below are reproducible.
from fleetopt.anneal import AnnealConfig, anneal
from fleetopt.exact import solve_exact
from fleetopt.feasibility import battery_profile, solution_cost, validate_solution
from fleetopt.generator import generate_instance
from fleetopt.greedy import greedy_assign
from fleetopt.milp import build_milp, dumps_lp

inst = generate_instance(2, 10, 3, 5, seed=13)
print(f"{len(inst.trips)} trips, {len(inst.vehicles)} vehicles, {inst.slot_grid.n_slots} slots")

# %%
# Greedy and annealing
# --------------------
# Greedy fills trips in start order, always picking the cheapest feasible
# vehicle. Annealing starts there and only ever reports something at least as
# cheap.
greedy = greedy_assign(inst)
trace = []
sa = anneal(inst, AnnealConfig(seed=0), trace=trace)
for name, sol in [("greedy", greedy), ("annealing", sa)]:
    assert validate_solution(inst, sol).ok
    print(f"{name:>10}: {solution_cost(inst, sol):8.3f}")

# %%
# The temperature falls geometrically; acceptance of uphill moves fades with it.
accepted = sum(r.accepted for r in trace)
print(f"tau {trace[0].tau:.4f} -> {trace[-1].tau:.4f}, {accepted} of {len(trace)} moves accepted")

# %%
# The optimum
# -----------
result = solve_exact(inst, time_limit_s=60.0)
print(result.certificate())
for name, sol in [("greedy", greedy), ("annealing", sa)]:
    print(f"{name:>10}: {100 * solution_cost(inst, sol) / result.cost:6.1f}% of optimal")

# %%
# Battery of each electric bus along the optimal plan, one value per slot.
for v in inst.vehicles:
    if inst.is_electric(v.id):
        levels = battery_profile(inst, result.solution, v.id).level_kwh
        print(v.id, " ".join(f"{x:5.1f}" for x in levels))

# %%
# The same problem as a MILP
# --------------------------
# The LP text can go straight to an external solver.
model = build_milp(inst)
print(model.counts())
print("\n".join(dumps_lp(model).splitlines()[:6]))

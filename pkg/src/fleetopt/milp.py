"""The assignment integer program, its LP-format export and a matching reader.

Variables, per vehicle v:

* ``a_v_t``        binary, v serves trip t
* ``ach_v_cp_s``   binary, electric v charges at pole cp in slot s
* ``m_v_x1_x2``    binary, v deadheads from task x1 straight to task x2
* ``c_v_s``        energy charged by electric v in slot s, in [0, C]
* ``e_v_n``        battery level of electric v at the start of slot n, in [0, C]

Tasks are trips plus, for electric vehicles, every (pole, slot) pair; m-vars
exist for every task pair ordered by start time. ``e_v_n`` for n = 1..N is the
level at the end of slot n - 1, so it matches the battery ledger used by the
validator. The battery lower bound is 0 here because LP files cannot state
strict inequalities; the validator insists on a positive level.

Big-M is not needed. Consecutive tasks are linked by
``m >= a(x1) + a(x2) - 1 - sum of a(x3) over tasks strictly between them``,
and time-incompatible pairs by ``a(x1) + a(x2) <= 1``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FleetOptError, ModelTooLarge
from .feasibility import levels, schedules
from .instance import Instance, InstanceIndex, Solution

DEFAULT_VARIABLE_CAP = 5_000_000


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = 1.0
    binary: bool = True


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # "<=", ">=" or "="
    rhs: float


@dataclass
class MilpModel:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: tuple[tuple[str, float], ...] = ()

    def counts(self) -> dict[str, int]:
        kinds: dict[str, int] = {}
        for v in self.variables:
            kinds[v.name.split("_", 1)[0]] = kinds.get(v.name.split("_", 1)[0], 0) + 1
        return {"variables": len(self.variables), "constraints": len(self.constraints), **kinds}


def sanitize(ident: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", ident)


def projected_variable_count(instance: Instance) -> int:
    idx = instance.index
    n_slots, n_poles, nt = idx.n_slots, idx.n_poles, idx.n_trips
    total = 0
    for v in range(len(idx.vehicle_ids)):
        n = nt
        if idx.vehicle_electric[v]:
            n += n_poles * n_slots
            total += n_poles * n_slots + n_slots + (n_slots + 1)
        total += nt + n * (n - 1) // 2
    return total


class _Names:
    """Sanitized names with collision detection."""

    def __init__(self):
        self.seen: dict[str, tuple] = {}

    def __call__(self, key: tuple, *parts) -> str:
        name = "_".join(sanitize(str(p)) for p in parts)
        prev = self.seen.setdefault(name, key)
        if prev != key:
            raise FleetOptError(f"identifier collision after sanitizing: {name!r}")
        return name


def build_milp(instance: Instance, variable_cap: int = DEFAULT_VARIABLE_CAP) -> MilpModel:
    projected = projected_variable_count(instance)
    if projected > variable_cap:
        raise ModelTooLarge(f"model would have {projected} variables (cap {variable_cap})")
    idx = instance.index
    nt = idx.n_trips
    name = _Names()
    model = MilpModel()
    objective: list[tuple[str, float]] = []

    def label(x: int) -> tuple[str, ...]:
        if x < nt:
            return (idx.trip_ids[x],)
        p, s = idx.charge_of_task(x)
        return (idx.pole_ids[p], str(s))

    tasks_of: list[list[int]] = []
    var_of: list[dict[int, str]] = []
    for v, vid in enumerate(idx.vehicle_ids):
        tasks = list(range(nt))
        if idx.vehicle_electric[v]:
            tasks += [idx.charge_task(p, s) for p in range(idx.n_poles) for s in range(idx.n_slots)]
        tasks.sort(key=idx.task_key)
        tasks_of.append(tasks)
        names = {}
        for x in tasks:
            names[x] = name(("a", v, x), "a" if x < nt else "ach", vid, *label(x))
        var_of.append(names)

    # trip and charging assignment variables
    for v, vid in enumerate(idx.vehicle_ids):
        m = idx.vehicle_model[v]
        w = idx.vehicle_weight[v]
        for t in range(nt):
            model.variables.append(Variable(var_of[v][t]))
            coef = w * idx.trip_energy_list[m][t]
            if coef != 0:
                objective.append((var_of[v][t], coef))
        for p in range(idx.n_poles if idx.vehicle_electric[v] else 0):
            for s in range(idx.n_slots):
                model.variables.append(Variable(var_of[v][idx.charge_task(p, s)]))

    # deadhead indicators, linking and forbidden pairs
    m_names: list[dict[tuple[int, int], str]] = []
    follows = idx.follows
    for v, vid in enumerate(idx.vehicle_ids):
        md = idx.vehicle_model[v]
        w = idx.vehicle_weight[v]
        dh = idx.dh_energy_list[md]
        tasks = tasks_of[v]
        names = {}
        for i, x1 in enumerate(tasks):
            for k in range(i + 1, len(tasks)):
                x2 = tasks[k]
                mv = name(("m", v, x1, x2), "m", vid, *label(x1), *label(x2))
                names[(x1, x2)] = mv
                model.variables.append(Variable(mv))
                e = dh[idx.task_dest[x1]][idx.task_origin[x2]]
                if e != 0 and math.isfinite(e):
                    objective.append((mv, w * e))
                between = [(var_of[v][x3], 1.0) for x3 in tasks[i + 1 : k]]
                model.constraints.append(
                    Constraint(
                        name(("link", v, x1, x2), "link", vid, *label(x1), *label(x2)),
                        ((mv, 1.0), (var_of[v][x1], -1.0), (var_of[v][x2], -1.0), *between),
                        ">=",
                        -1.0,
                    )
                )
                if not follows[x1, x2]:
                    model.constraints.append(
                        Constraint(
                            name(("pair", v, x1, x2), "pair", vid, *label(x1), *label(x2)),
                            ((var_of[v][x1], 1.0), (var_of[v][x2], 1.0)),
                            "<=",
                            1.0,
                        )
                    )
        m_names.append(names)

    for t in range(nt):
        model.constraints.append(
            Constraint(
                name(("trip", t), "trip", idx.trip_ids[t]),
                tuple((var_of[v][t], 1.0) for v in range(len(idx.vehicle_ids))),
                "=",
                1.0,
            )
        )
    evs = [v for v in range(len(idx.vehicle_ids)) if idx.vehicle_electric[v]]
    if evs:
        for p in range(idx.n_poles):
            for s in range(idx.n_slots):
                c = idx.charge_task(p, s)
                model.constraints.append(
                    Constraint(
                        name(("slot", p, s), "slot", idx.pole_ids[p], str(s)),
                        tuple((var_of[v][c], 1.0) for v in evs),
                        "<=",
                        1.0,
                    )
                )

    # battery recurrence
    for v in evs:
        vid = idx.vehicle_ids[v]
        md = idx.vehicle_model[v]
        cap = idx.vehicle_capacity[v]
        dh = idx.dh_energy_list[md]
        for s in range(idx.n_slots):
            model.variables.append(Variable(name(("c", v, s), "c", vid, s), 0.0, cap, False))
        for n in range(idx.n_slots + 1):
            model.variables.append(Variable(name(("e", v, n), "e", vid, n), 0.0, cap, False))
        model.constraints.append(
            Constraint(name(("init", v), "init", vid), ((f"e_{sanitize(vid)}_0", 1.0),), "=",
                       float(idx.vehicle_initial[v]))
        )
        used: list[list[tuple[str, float]]] = [[] for _ in range(idx.n_slots)]
        for t in range(nt):
            e = idx.trip_energy_list[md][t]
            if e != 0:
                used[idx.slot_of_end(idx.task_end[t])].append((var_of[v][t], e))
        for (x1, x2), mv in m_names[v].items():
            e = dh[idx.task_dest[x1]][idx.task_origin[x2]]
            if e != 0 and math.isfinite(e):
                used[idx.slot_of_end(idx.task_start[x2])].append((mv, e))
        for s in range(idx.n_slots):
            cv = f"c_{sanitize(vid)}_{s}"
            power = [
                (var_of[v][idx.charge_task(p, s)], -idx.pole_power[p][md])
                for p in range(idx.n_poles)
                if idx.pole_power[p][md] != 0
            ]
            model.constraints.append(
                Constraint(name(("cap", v, s), "cap", vid, s), ((cv, 1.0), *power), "<=", 0.0)
            )
            model.constraints.append(
                Constraint(
                    name(("lvl", v, s), "lvl", vid, s),
                    (
                        (f"e_{sanitize(vid)}_{s + 1}", 1.0),
                        (f"e_{sanitize(vid)}_{s}", -1.0),
                        (cv, -1.0),
                        *((var, coef) for var, coef in sorted(used[s])),
                    ),
                    "=",
                    0.0,
                )
            )
    model.objective = tuple(objective)
    return model


# ------------------------------------------------------------------- LP text


def _num(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _terms(terms, per_line: int = 8) -> str:
    out = []
    for i, (var, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        if i == 0:
            piece = body if sign == "+" else f"- {body}"
        else:
            piece = f"{sign} {body}"
        if i and i % per_line == 0:
            piece = "\n   " + piece
        out.append(piece)
    return " ".join(out).replace(" \n", "\n")


def dumps_lp(model: MilpModel) -> str:
    lines = ["\\ energy-optimal fleet assignment", "Minimize", " obj:"]
    lines.append("   " + (_terms(model.objective) if model.objective else f"0 {model.variables[0].name}"))
    lines.append("Subject To")
    for c in model.constraints:
        lines.append(f" {c.name}:")
        lines.append(f"   {_terms(c.terms)} {c.sense} {_num(c.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if not v.binary:
            lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    lines.append("Binaries")
    binaries = [v.name for v in model.variables if v.binary]
    for i in range(0, len(binaries), 8):
        lines.append(" " + " ".join(binaries[i : i + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: MilpModel, path: str | Path) -> None:
    Path(path).write_text(dumps_lp(model))


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_.]*)(?P<colon>\s*:)?"
    r"|(?P<op><=|>=|=<|=>|=|<|>)"
    r"|(?P<sign>[+-]))"
)
_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "binaries": "bin", "binary": "bin", "bin": "bin", "end": "end",
}


def _tokens(text: str):
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FleetOptError(f"cannot parse LP text near {text[pos:pos + 30]!r}")
        pos = m.end()
        if m.group("name") and m.group("colon"):
            yield "label", m.group("name")
        elif m.group("name"):
            yield "name", m.group("name")
        elif m.group("num"):
            yield "num", float(m.group("num"))
        elif m.group("op"):
            op = {"=<": "<=", "=>": ">=", "<": "<=", ">": ">="}.get(m.group("op"), m.group("op"))
            yield "op", op
        else:
            yield "sign", m.group("sign")


def _linear(tokens: list, start: int) -> tuple[list[tuple[str, float]], int]:
    terms: list[tuple[str, float]] = []
    i = start
    sign, coef = 1.0, None
    while i < len(tokens) and tokens[i][0] in ("sign", "num", "name"):
        kind, val = tokens[i]
        if kind == "sign":
            sign = -1.0 if val == "-" else 1.0
        elif kind == "num":
            coef = val
        else:
            c = sign * (1.0 if coef is None else coef)
            if c != 0:
                terms.append((val, c))
            sign, coef = 1.0, None
        i += 1
    return terms, i


def parse_lp(text: str) -> MilpModel:
    """Read the LP subset written by ``dumps_lp`` back into a model."""
    sections: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": []}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0]
        key = line.strip().lower()
        if key in _SECTIONS:
            current = _SECTIONS[key]
            if current == "end":
                break
            continue
        if current is None:
            if key:
                raise FleetOptError(f"text outside any LP section: {raw!r}")
            continue
        sections[current].append(line)

    model = MilpModel()
    obj = list(_tokens(" ".join(sections["obj"])))
    if obj and obj[0][0] == "label":
        obj = obj[1:]
    model.objective = tuple(_linear(obj, 0)[0])

    toks = list(_tokens(" ".join(sections["st"])))
    i = 0
    while i < len(toks):
        if toks[i][0] != "label":
            raise FleetOptError("every constraint needs a name")
        cname = toks[i][1]
        terms, i = _linear(toks, i + 1)
        if i + 1 >= len(toks) or toks[i][0] != "op":
            raise FleetOptError(f"constraint {cname!r} lacks a comparison")
        sense = toks[i][1]
        rhs_sign = 1.0
        i += 1
        if toks[i][0] == "sign":
            rhs_sign = -1.0 if toks[i][1] == "-" else 1.0
            i += 1
        model.constraints.append(Constraint(cname, tuple(terms), sense, rhs_sign * toks[i][1]))
        i += 1

    bounds: dict[str, tuple[float, float]] = {}
    for line in sections["bounds"]:
        m = re.fullmatch(r"\s*(\S+)\s*<=\s*([A-Za-z_][A-Za-z0-9_.]*)\s*<=\s*(\S+)\s*", line)
        if m:
            bounds[m.group(2)] = (float(m.group(1)), float(m.group(3)))
        elif line.strip():
            raise FleetOptError(f"unsupported bound line {line!r}")
    binaries = [n for line in sections["bin"] for n in line.split()]

    # recover declaration order: binaries as listed, continuous as bounded
    for n in binaries:
        model.variables.append(Variable(n))
    for n, (lb, ub) in bounds.items():
        model.variables.append(Variable(n, lb, ub, False))
    return model


def load_lp(path: str | Path) -> MilpModel:
    return parse_lp(Path(path).read_text())


# ------------------------------------------------------- solution as values


def implied_values(instance: Instance, solution: Solution) -> dict[str, float]:
    """Variable values that encode ``solution``; charging runs at full pole power."""
    idx: InstanceIndex = instance.index
    nt = idx.n_trips
    sched = schedules(idx, solution)
    vals: dict[str, float] = {}

    def lab(x: int) -> str:
        if x < nt:
            return sanitize(idx.trip_ids[x])
        p, s = idx.charge_of_task(x)
        return f"{sanitize(idx.pole_ids[p])}_{s}"

    for v, vid in enumerate(idx.vehicle_ids):
        sv = sanitize(vid)
        tasks = sched.get(v, [])
        for x in tasks:
            vals[f"{'a' if x < nt else 'ach'}_{sv}_{lab(x)}"] = 1.0
        for x1, x2 in zip(tasks, tasks[1:]):
            vals[f"m_{sv}_{lab(x1)}_{lab(x2)}"] = 1.0
        if idx.vehicle_electric[v]:
            md = idx.vehicle_model[v]
            for s in range(idx.n_slots):
                vals[f"c_{sv}_{s}"] = sum(idx.pole_power[p][md] for p in range(idx.n_poles)
                                         if idx.charge_task(p, s) in tasks)
            vals[f"e_{sv}_0"] = float(idx.vehicle_initial[v])
            for s, lv in enumerate(levels(idx, v, tasks)):
                vals[f"e_{sv}_{s + 1}"] = lv
    return vals


def objective_value(model: MilpModel, values: dict[str, float]) -> float:
    return math.fsum(c * values.get(v, 0.0) for v, c in model.objective)


def violated_constraints(model: MilpModel, values: dict[str, float], tol: float = 1e-6) -> list[str]:
    """Names of constraints and bounds that ``values`` break (missing values are 0)."""
    bad = []
    for c in model.constraints:
        lhs = math.fsum(coef * values.get(v, 0.0) for v, coef in c.terms)
        ok = (
            lhs <= c.rhs + tol if c.sense == "<="
            else lhs >= c.rhs - tol if c.sense == ">="
            else abs(lhs - c.rhs) <= tol
        )
        if not ok:
            bad.append(c.name)
    for v in model.variables:
        x = values.get(v.name, 0.0)
        if not v.lb - tol <= x <= v.ub + tol:
            bad.append(v.name)
    return bad

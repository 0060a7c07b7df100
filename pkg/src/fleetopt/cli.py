"""Command-line entry point: thin adapters over the library.

Exit codes: 0 success, 1 infeasible instance or failed validation, 2 usage
or input errors. Set FLEETOPT_LOG to error, info or debug for logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .anneal import AnnealConfig, anneal, write_trace
from .errors import FleetOptError, InfeasibleError, InstanceValidationError, TimeLimitError
from .exact import solve_exact
from .feasibility import solution_cost, validate_solution
from .generator import generate_instance
from .greedy import GreedyConfig, greedy_assign
from .gtfs import ingest_gtfs
from .instance import dumps_instance, load_instance, load_solution, save_instance, solution_to_dict
from .milp import DEFAULT_VARIABLE_CAP, build_milp, export_lp
from .pipeline import (
    FeatureTable,
    clean_and_label,
    evaluate_matching,
    fit_ols,
    grid_network,
    load_model,
    load_network,
    make_samples,
    map_match,
    predict_trip_energy,
    read_samples,
    read_trace,
    save_model,
    write_samples,
)
from .pipeline.matching import DEFAULT_RADIUS_M, DEFAULT_WINDOW
from .pipeline.samples import DEFAULT_JOIN_HORIZON_S, WEATHER_COLUMNS
from .pipeline.telemetry import labels_by_point

log = logging.getLogger("fleetopt")

DEFAULT_SEED = 0
SA_FLAGS = ("k_max", "p_start", "p_end", "p_swap", "retry_limit", "restarts", "trace")
SUITE = [(1 if s <= 10 else 2, s) for s in range(1, 21)]


class UsageError(Exception):
    pass


def _f6(x: float) -> str:
    return f"{x:.6f}"


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_f6(v) if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    inst = generate_instance(args.lines, args.trips_per_line, args.evs, args.icev_factor, args.seed)
    if args.output:
        save_instance(inst, args.output)
    else:
        sys.stdout.write(dumps_instance(inst))
    return 0


def cmd_ingest(args) -> int:
    inst = ingest_gtfs(args.directory, args.deadhead, args.energy_model, args.fleet)
    save_instance(inst, args.output)
    return 0


def _greedy_config(args) -> GreedyConfig:
    return GreedyConfig(args.alpha, args.floor)


def _anneal_config(args, seed: int) -> AnnealConfig:
    defaults = AnnealConfig()
    return AnnealConfig(
        k_max=args.k_max if args.k_max is not None else defaults.k_max,
        p_start=args.p_start if args.p_start is not None else defaults.p_start,
        p_end=args.p_end if args.p_end is not None else defaults.p_end,
        p_swap=args.p_swap if args.p_swap is not None else defaults.p_swap,
        seed=seed,
        neighbor_retry_limit=args.retry_limit if args.retry_limit is not None else defaults.neighbor_retry_limit,
    )


def _anneal_job(job):
    inst_path, config, greedy_config = job
    inst = load_instance(inst_path)
    sol = anneal(inst, config, greedy_config)
    return config.seed, solution_cost(inst, sol), sol


def cmd_solve(args) -> int:
    if args.algo != "sa":
        given = [f for f in SA_FLAGS if getattr(args, f) is not None]
        if given:
            raise UsageError(f"--{given[0].replace('_', '-')} only applies to --algo sa")
    inst = load_instance(args.instance)
    gc = _greedy_config(args)
    t0 = time.perf_counter()
    extra = {}
    if args.algo == "greedy":
        sol = greedy_assign(inst, gc)
    elif args.algo == "sa":
        restarts = args.restarts or 1
        if restarts > 1:
            jobs = [(args.instance, _anneal_config(args, args.seed + r), gc) for r in range(restarts)]
            with ProcessPoolExecutor() as pool:
                results = list(pool.map(_anneal_job, jobs))
            best_seed, _, sol = min(results, key=lambda r: (r[1], r[0]))
            extra["best_seed"] = best_seed
        else:
            trace = [] if args.trace else None
            sol = anneal(inst, _anneal_config(args, args.seed), gc, trace=trace)
            if args.trace:
                write_trace(trace, args.trace)
    else:
        res = solve_exact(inst, args.time_limit)
        sol = res.solution
        extra.update(res.certificate())
    wall = (time.perf_counter() - t0) * 1000.0 if args.timing else None
    cost = solution_cost(inst, sol)
    doc = solution_to_dict(sol, cost, args.algo, args.seed if args.algo == "sa" else None, wall, **extra)
    _emit(json.dumps(doc, indent=1) + "\n", args.output)
    log.info("%s cost %.6f", args.algo, cost)
    return 0


def cmd_validate(args) -> int:
    inst = load_instance(args.instance)
    report = validate_solution(inst, load_solution(args.solution))
    _emit(report.to_json() + "\n", args.output)
    return 0 if report.ok else 1


def cmd_export_lp(args) -> int:
    export_lp(build_milp(load_instance(args.instance), args.cap), args.output)
    return 0


def _trace_locations(points):
    return [(p.lat, p.lon) for p in points]


def cmd_match(args) -> int:
    net = load_network(args.network)
    points = read_trace(args.trace)
    matched = map_match(net, _trace_locations(points), args.radius, args.window)
    rows = [[i, _f6(p.ts_s), m or ""] for i, (p, m) in enumerate(zip(points, matched))]
    _emit(_csv_text(["index", "ts_s", "segment_id"], rows), args.output)
    return 0


def cmd_match_eval(args) -> int:
    net = load_network(args.network) if args.network else grid_network(seed=args.seed)
    sigmas = [float(s) for s in args.sigmas.split(",") if s.strip()]
    acc = evaluate_matching(net, args.routes, args.points, sigmas, args.seed)
    _emit(_csv_text(["sigma", "accuracy"], [[float(s), float(a)] for s, a in acc.items()]), args.output)
    return 0


def cmd_samples(args) -> int:
    net = load_network(args.network)
    points = read_trace(args.trace)
    garages = json.loads(Path(args.garages).read_text()) if args.garages else ()
    labels = labels_by_point(clean_and_label(points, args.kind, garages), len(points))
    matched = map_match(net, _trace_locations(points), args.radius, args.window)
    weather = FeatureTable.read_csv(args.weather, WEATHER_COLUMNS, "weather")
    traffic = FeatureTable.read_csv(args.traffic, ("speed_ratio",), "traffic")
    samples = make_samples(
        net, [p.ts_s for p in points], _trace_locations(points), matched, labels, weather, traffic, args.horizon
    )
    write_samples(samples, args.output)
    log.info("%d samples", len(samples))
    return 0


def cmd_calibrate(args) -> int:
    feats = [f for f in args.features.split(",") if f] if args.features else None
    model = fit_ols(read_samples(args.samples), feats, not args.no_road_class)
    save_model(model, args.output)
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    with open(args.segments, newline="") as fh:
        rows = []
        for r in csv.DictReader(fh):
            rows.append({k: (v if k == "road_class" else float(v)) for k, v in r.items() if v != ""})
    _emit(_f6(predict_trip_energy(model, rows)) + "\n", args.output)
    return 0


def cmd_report(args) -> int:
    if args.suite:
        named = [(f"lines{li}_seed{s}", generate_instance(li, 10, 3, 5, s)) for li, s in SUITE]
    else:
        named = [(Path(p).stem, load_instance(p)) for p in args.instances]
    if not named:
        raise UsageError("give instance files or --suite")
    rows = []
    for name, inst in named:
        greedy = solution_cost(inst, greedy_assign(inst))
        sa = solution_cost(inst, anneal(inst, AnnealConfig(k_max=args.k_max, seed=args.seed)))
        exact = solve_exact(inst, args.time_limit)
        rows.append([
            name, greedy, sa, exact.cost,
            100.0 * greedy / exact.cost, 100.0 * sa / exact.cost, 100.0, str(exact.optimal).lower(),
        ])
    header = ["instance", "greedy_cost", "sa_cost", "exact_cost", "greedy_pct", "sa_pct", "exact_pct", "optimal"]
    _emit(_csv_text(header, rows), args.output)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fleetopt", description="Energy-aware assignment of mixed bus fleets.")
    p.add_argument("--version", action="version", version=f"fleetopt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("--lines", type=int, default=1)
    g.add_argument("--trips-per-line", type=int, default=10)
    g.add_argument("--evs", type=int, default=3)
    g.add_argument("--icev-factor", type=int, default=5)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    g = sub.add_parser("ingest-gtfs", help="build an instance from a GTFS directory")
    g.add_argument("directory")
    g.add_argument("--deadhead", default="haversine", help='"haversine" or CSV from,to,duration_s')
    g.add_argument("--energy-model", help="JSON: model id -> kWh/km or calibrated model")
    g.add_argument("--fleet", help="JSON fleet description")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_ingest)

    g = sub.add_parser("solve", help="assign trips and charging")
    g.add_argument("instance")
    g.add_argument("--algo", choices=["greedy", "sa", "exact"], default="greedy")
    g.add_argument("--alpha", type=float, default=GreedyConfig.alpha, help="layover weight, kWh per second")
    g.add_argument("--floor", type=float, default=0.0, help="charging safety floor, kWh")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--k-max", type=int)
    g.add_argument("--p-start", type=float)
    g.add_argument("--p-end", type=float)
    g.add_argument("--p-swap", type=float)
    g.add_argument("--retry-limit", type=int)
    g.add_argument("--restarts", type=int)
    g.add_argument("--trace", help="CSV of the annealing trace")
    g.add_argument("--time-limit", type=float, default=60.0, help="exact solver limit, seconds")
    g.add_argument("--timing", action="store_true", help="record wall_time_ms")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_solve)

    g = sub.add_parser("validate", help="list constraint violations of a solution")
    g.add_argument("instance")
    g.add_argument("solution")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_validate)

    g = sub.add_parser("export-lp", help="write the integer program in LP format")
    g.add_argument("instance")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--cap", type=int, default=DEFAULT_VARIABLE_CAP, help="maximum variable count")
    g.set_defaults(func=cmd_export_lp)

    def matching_flags(g):
        g.add_argument("--radius", type=float, default=DEFAULT_RADIUS_M)
        g.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    g = sub.add_parser("match", help="map-match a trace to road segments")
    g.add_argument("network")
    g.add_argument("trace")
    matching_flags(g)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_match)

    g = sub.add_parser("match-eval", help="matching accuracy under synthetic noise")
    g.add_argument("--network", help="network JSON; default is a synthetic street grid")
    g.add_argument("--routes", type=int, default=10)
    g.add_argument("--points", type=int, default=200)
    g.add_argument("--sigmas", default="1.1,20,60,100,140")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_match_eval)

    g = sub.add_parser("samples", help="cut labelled per-segment samples from a trace")
    g.add_argument("network")
    g.add_argument("trace")
    g.add_argument("--kind", choices=["electric", "liquid_fuel"], required=True)
    g.add_argument("--weather", required=True)
    g.add_argument("--traffic", required=True)
    g.add_argument("--garages", help="JSON list of polygons, each a list of [lat, lon]")
    g.add_argument("--horizon", type=float, default=DEFAULT_JOIN_HORIZON_S)
    matching_flags(g)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_samples)

    g = sub.add_parser("calibrate", help="fit the linear energy model")
    g.add_argument("samples")
    g.add_argument("--features", help="comma-separated numeric features")
    g.add_argument("--no-road-class", action="store_true")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_calibrate)

    g = sub.add_parser("predict", help="trip energy from per-segment features")
    g.add_argument("model")
    g.add_argument("segments", help="CSV, one row of features per segment")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_predict)

    g = sub.add_parser("report", help="greedy and annealing cost as a percentage of the optimum")
    g.add_argument("instances", nargs="*")
    g.add_argument("--suite", action="store_true", help="use the 20 standard generated instances")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--k-max", type=int, default=AnnealConfig.k_max)
    g.add_argument("--time-limit", type=float, default=60.0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_report)
    return p


def _setup_logging() -> None:
    level = os.environ.get("FLEETOPT_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def run(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fleetopt: error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleError, TimeLimitError, InstanceValidationError) as exc:
        print(f"fleetopt: {exc}", file=sys.stderr)
        return 1
    except (FleetOptError, OSError, ValueError) as exc:
        print(f"fleetopt: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())

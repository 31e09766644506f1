"""Command-line entry point.

Subcommands: generate, solve, bench, ablate, oracle, plot. Exit codes are
0 on success, 1 for usage errors, 2 for bad input data and 3 for internal
failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import svg
from .baseline import DEFAULT_EVALUATIONS, Budget, exact_solve, random_search
from .evaluate import evaluate_routes
from .ga import VARIANTS, GaConfig, run_oga
from .instgen import FIELD_COUNTS, GenParams, derive_seed, generate, suite_manifest
from .model import (
    Instance,
    MachineMetrics,
    Objective,
    Solution,
    dumps,
    instance_to_dict,
    load_instance,
    validate_instance,
)

ALGORITHMS = ("rand", "OGA", "OGA-greedy", "OGA-sort", "GA-no-order")
OBJECTIVES = ("s", "t", "c")
CSV_COLUMNS = ("case_id", "algorithm", "objective", "s_P_m", "t_P_s", "c_P_L", "wall_time_s", "seed", "status")
SUMMARY_ID = "MEAN"
VERIFY_FRACTION = 0.05
VERIFY_SEED = 0x5EED

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- parsing helpers ------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _objective_list(text: str) -> list[str]:
    vals = [x.strip() for x in text.split(",") if x.strip()]
    bad = [v for v in vals if v not in OBJECTIVES]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"objectives must be drawn from s,t,c; got {text!r}")
    return vals


def canonical_algorithm(name: str) -> str:
    lookup = {a.lower(): a for a in ALGORITHMS}
    try:
        return lookup[name.strip().lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown algorithm {name!r}; expected one of {', '.join(ALGORITHMS)}") from None


def _algo_list(text: str) -> list[str]:
    vals = [canonical_algorithm(x) for x in text.split(",") if x.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("empty algorithm list")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def thread_cap() -> int:
    raw = os.environ.get("EDVRP_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"EDVRP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"EDVRP_THREADS must be a positive integer, got {raw!r}")
    return n


# --- file I/O -------------------------------------------------------------------


def read_instance(path) -> Instance:
    try:
        inst = load_instance(path)
    except FileNotFoundError:
        raise DataError(f"instance file not found: {path}") from None
    except (json.JSONDecodeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None
    problems = validate_instance(inst)
    if problems:
        raise DataError(f"{path}: invalid instance: " + "; ".join(problems[:5]))
    return inst


def solution_to_dict(sol: Solution, algorithm: str = "", seed: Optional[int] = None, trace=None) -> dict:
    out = {
        "algorithm": algorithm,
        "objective": sol.objective_used.value,
        "seed": seed,
        "routes": [[[l, e] for l, e in r] for r in sol.routes],
        "per_machine": [
            {"s_k": m.s_k, "s_k_w": m.s_k_w, "t_k": m.t_k, "c_k_o": m.c_k_o} for m in sol.per_machine
        ],
        "s_P": sol.s_P,
        "t_P": sol.t_P,
        "c_P": sol.c_P,
        "trace": None,
    }
    if trace is not None:
        out["trace"] = {
            "best_objective_per_iteration": list(trace.best_objective_per_iteration),
            "wall_time_s": trace.wall_time_s,
        }
    return out


def solution_from_dict(data: dict) -> Solution:
    try:
        routes = tuple(tuple((int(l), int(e)) for l, e in r) for r in data["routes"])
        per = tuple(MachineMetrics(m["s_k"], m["s_k_w"], m["t_k"], m["c_k_o"]) for m in data["per_machine"])
        return Solution(routes, per, data["s_P"], data["t_P"], data["c_P"], Objective.parse(data["objective"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed solution JSON: {exc!r}") from None


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from None


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# --- running algorithms -----------------------------------------------------------


@dataclass(frozen=True)
class RunOptions:
    population: int = 200
    iterations: int = 200
    budget_evals: Optional[int] = DEFAULT_EVALUATIONS
    budget_seconds: Optional[float] = None

    def budget(self) -> Budget:
        if self.budget_seconds is not None:
            return Budget.wall_clock(self.budget_seconds)
        return Budget.evals(self.budget_evals or DEFAULT_EVALUATIONS)


def run_algorithm(inst: Instance, algorithm: str, objective, seed: int, opts: RunOptions):
    """Run one algorithm; returns (solution, trace or None)."""
    if algorithm == "rand":
        return random_search(inst, objective, opts.budget(), np.random.default_rng(seed)), None
    cfg = GaConfig.for_variant(
        algorithm,
        objective=objective,
        seed=seed,
        population_size=opts.population,
        iterations=opts.iterations,
    )
    trace = run_oga(inst, cfg)
    return trace.final_best, trace


def cell_seed(case_seed: int, algorithm: str, objective: str) -> int:
    return derive_seed(case_seed, ALGORITHMS.index(algorithm), OBJECTIVES.index(objective))


@dataclass(frozen=True)
class Task:
    case_id: str
    instance_path: Optional[str]
    params: Optional[dict]
    algorithm: str
    objective: str
    seed: int
    opts: RunOptions
    save_dir: Optional[str] = None


def _task_instance(task: Task) -> Instance:
    if task.instance_path is not None and Path(task.instance_path).exists():
        return read_instance(task.instance_path)
    if task.params is None:
        raise DataError(f"{task.case_id}: no instance file and no generation params")
    return generate(GenParams.from_dict(task.params))


def run_task(task: Task) -> dict:
    row = {"case_id": task.case_id, "algorithm": task.algorithm, "objective": task.objective, "seed": task.seed}
    try:
        inst = _task_instance(task)
        t0 = time.perf_counter()
        sol, trace = run_algorithm(inst, task.algorithm, task.objective, task.seed, task.opts)
        row.update(s_P_m=sol.s_P, t_P_s=sol.t_P, c_P_L=sol.c_P, wall_time_s=time.perf_counter() - t0, status="ok")
        if task.save_dir is not None:
            name = f"{task.case_id}__{task.algorithm}__{task.objective}.json"
            payload = solution_to_dict(sol, task.algorithm, task.seed)
            Path(task.save_dir, name).write_text(dumps(payload))
    except (DataError, ValueError) as exc:
        row.update(s_P_m=None, t_P_s=None, c_P_L=None, wall_time_s=None, status=f"error: {exc}")
    return row


def load_manifest(path) -> tuple[list[dict], Path]:
    data = read_json(path)
    if not isinstance(data, list) or not all(isinstance(c, dict) and "case_id" in c and "seed" in c for c in data):
        raise DataError(f"{path}: manifest must be a JSON list of objects with case_id and seed")
    return data, Path(path).resolve().parent


def build_tasks(cases, base_dir, algorithms, objectives, opts: RunOptions, save_dir=None) -> list[Task]:
    tasks = []
    for case in sorted(cases, key=lambda c: c["case_id"]):
        path = str(base_dir / case["file"]) if case.get("file") else None
        for algorithm in algorithms:
            for objective in objectives:
                tasks.append(
                    Task(
                        case["case_id"],
                        path,
                        case.get("params"),
                        algorithm,
                        objective,
                        cell_seed(int(case["seed"]), algorithm, objective),
                        opts,
                        save_dir,
                    )
                )
    return tasks


def run_tasks(tasks: Sequence[Task], workers: Optional[int] = None) -> list[dict]:
    workers = min(workers or thread_cap(), max(len(tasks), 1))
    if workers <= 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_task, tasks, chunksize=1))


def summarize(rows: Sequence[dict], algorithms, objectives) -> list[dict]:
    """One mean row per (algorithm, objective) over successful runs."""
    out = []
    for algorithm in algorithms:
        for objective in objectives:
            ok = [r for r in rows if r["algorithm"] == algorithm and r["objective"] == objective and r["status"] == "ok"]
            row = {"case_id": SUMMARY_ID, "algorithm": algorithm, "objective": objective, "seed": None}
            if ok:
                row.update(
                    s_P_m=float(np.mean([r["s_P_m"] for r in ok])),
                    t_P_s=float(np.mean([r["t_P_s"] for r in ok])),
                    c_P_L=float(np.mean([r["c_P_L"] for r in ok])),
                    wall_time_s=float(np.mean([r["wall_time_s"] for r in ok])),
                )
            else:
                row.update(s_P_m=None, t_P_s=None, c_P_L=None, wall_time_s=None)
            row["status"] = f"n={len(ok)}"
            out.append(row)
    return out


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: Sequence[dict], timing: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        vals = {k: r.get(k) for k in CSV_COLUMNS}
        if not timing:
            vals["wall_time_s"] = None
        writer.writerow([_cell(vals[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


def verify_rows(tasks: Sequence[Task], rows: Sequence[dict]) -> int:
    """Re-run a deterministic 5% sample of rows and compare metrics exactly."""
    n = len(tasks)
    if n == 0:
        return 0
    k = max(1, math.ceil(VERIFY_FRACTION * n))
    picks = sorted(np.random.default_rng(VERIFY_SEED).choice(n, size=k, replace=False).tolist())
    for i in picks:
        again = run_task(tasks[i])
        for key in ("s_P_m", "t_P_s", "c_P_L", "status"):
            if again[key] != rows[i][key]:
                raise RuntimeError(
                    f"verification mismatch for {tasks[i].case_id}/{tasks[i].algorithm}/{tasks[i].objective}: "
                    f"{key} {rows[i][key]!r} != {again[key]!r}"
                )
    return k


def ordering_checks(summary: Sequence[dict], pairs) -> list[str]:
    means = {(r["algorithm"], r["objective"]): r for r in summary}
    col = {"s": "s_P_m", "t": "t_P_s", "c": "c_P_L"}
    lines = []
    for better, worse in pairs:
        for obj in OBJECTIVES:
            a, b = means.get((better, obj)), means.get((worse, obj))
            if a is None or b is None or a[col[obj]] is None or b[col[obj]] is None:
                continue
            va, vb = a[col[obj]], b[col[obj]]
            verdict = "ok" if va <= vb else "VIOLATED"
            lines.append(f"{better}({obj}) {va:.3f} <= {worse}({obj}) {vb:.3f}: {verdict}")
    return lines


def run_suite(cases, base_dir, algorithms, objectives, opts: RunOptions, save_dir=None, workers=None):
    """Run every (case, algorithm, objective) cell; returns (tasks, rows, summary)."""
    tasks = build_tasks(cases, Path(base_dir), algorithms, objectives, opts, save_dir)
    rows = run_tasks(tasks, workers)
    return tasks, rows, summarize(rows, algorithms, objectives)


# --- subcommands ------------------------------------------------------------------


def cmd_generate(args) -> int:
    bad = [f for f in args.fields if f not in FIELD_COUNTS]
    if bad:
        raise UsageError(f"--fields values must be drawn from {set(FIELD_COUNTS)}, got {bad}")
    if any(m < 1 for m in args.machines):
        raise UsageError("--machines values must be positive")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    overrides = {"target_nodes": args.nodes, "line_spacing_m": args.spacing}
    try:
        cases = suite_manifest(args.cases, args.seed, args.fields, args.machines, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for case in cases:
        inst = generate(GenParams.from_dict(case["params"]))
        name = f"{case['case_id']}.json"
        (out / name).write_text(dumps(instance_to_dict(inst)))
        case["file"] = name
    (out / "manifest.json").write_text(json.dumps(cases, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(cases)} instances and manifest.json to {out}")
    return EXIT_OK


def _opts_from(args) -> RunOptions:
    return RunOptions(
        population=args.population,
        iterations=args.iterations,
        budget_evals=args.budget_evals,
        budget_seconds=args.budget_seconds,
    )


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    if args.algo == "rand":
        algorithm = "rand"
    else:
        algorithm = GaConfig(enable_sort=not args.no_sort, enable_greedy=not args.no_greedy).variant
    sol, trace = run_algorithm(inst, algorithm, args.objective, args.seed, _opts_from(args))
    _write_text(args.out, dumps(solution_to_dict(sol, algorithm, args.seed, trace)))
    print(f"{algorithm}({args.objective}): s_P={sol.s_P:.3f} m t_P={sol.t_P:.3f} s c_P={sol.c_P:.3f} L", file=sys.stderr)
    return EXIT_OK


def _suite_command(args, algorithms, pairs) -> int:
    cases, base = load_manifest(args.manifest)
    save_dir = None
    if args.save_solutions:
        Path(args.save_solutions).mkdir(parents=True, exist_ok=True)
        save_dir = str(Path(args.save_solutions).resolve())
    tasks, rows, summary = run_suite(cases, base, algorithms, args.objectives, _opts_from(args), save_dir)
    if args.verify:
        n = verify_rows(tasks, rows)
        print(f"verified {n} of {len(rows)} rows", file=sys.stderr)
    _write_text(args.out, format_csv(list(rows) + summary, timing=args.timing))
    for line in ordering_checks(summary, pairs):
        print(line, file=sys.stderr)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        print(f"{failed} of {len(rows)} runs failed; see status column", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    return _suite_command(args, args.algos, [("OGA", "rand")])


def cmd_ablate(args) -> int:
    variants = list(VARIANTS)
    pairs = [("OGA", "OGA-greedy"), ("OGA", "OGA-sort"), ("OGA-greedy", "GA-no-order"), ("OGA-sort", "GA-no-order")]
    return _suite_command(args, variants, pairs)


def cmd_oracle(args) -> int:
    inst = read_instance(args.instance)
    try:
        sol, value = exact_solve(inst, args.objective)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if args.json:
        payload = solution_to_dict(sol, "exact")
        payload["optimum"] = value
        sys.stdout.write(dumps(payload))
        return EXIT_OK
    print(f"optimum {args.objective} = {value!r}")
    for k, route in enumerate(sol.routes, start=1):
        print(f"machine {k}: " + " ".join(f"({l},{e})" for l, e in route))
    return EXIT_OK


def cmd_plot(args) -> int:
    inst = read_instance(args.instance)
    data = read_json(args.solution)
    stored = solution_from_dict(data)
    try:
        sol = evaluate_routes(stored.routes, inst, stored.objective_used)
    except ValueError as exc:
        raise DataError(f"solution does not match instance: {exc}") from None
    if not inst.has_geometry:
        raise DataError("instance has no coordinates to draw")
    title = f"{data.get('algorithm', '')} {sol.objective_used.value}: s_P={sol.s_P:.1f} m"
    _write_text(args.out, svg.render_solution(inst, sol, title))
    trace = data.get("trace")
    if trace and trace.get("best_objective_per_iteration"):
        conv = args.convergence_out or str(Path(args.out).with_name(Path(args.out).stem + "_convergence.svg"))
        _write_text(conv, svg.render_convergence(trace["best_objective_per_iteration"], title, f"best {sol.objective_used.value}"))
    return EXIT_OK


def _add_run_options(p) -> None:
    p.add_argument("--population", type=_positive_int, default=200)
    p.add_argument("--iterations", type=_positive_int, default=200)
    p.add_argument("--budget-evals", type=_positive_int, default=DEFAULT_EVALUATIONS, help="rand baseline sample count")
    p.add_argument("--budget-seconds", type=float, default=None, help="rand baseline wall-clock budget (not reproducible)")


def _add_suite_options(p) -> None:
    p.add_argument("manifest")
    p.add_argument("--objectives", type=_objective_list, default=list(OBJECTIVES))
    p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    p.add_argument("--timing", action="store_true", help="fill wall_time_s (output is then not reproducible)")
    p.add_argument("--verify", action="store_true", help="re-run 5%% of rows and check they match")
    p.add_argument("--save-solutions", default=None, metavar="DIR")
    _add_run_options(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edvrp", description="Entrance-aware routing of machines over farm working lines.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write random farm instances and a manifest")
    p.add_argument("--fields", type=_int_list, default=[3], help="comma list drawn from 1,2,3,4,6")
    p.add_argument("--machines", type=_int_list, default=[5], help="comma list of fleet sizes")
    p.add_argument("--cases", type=_positive_int, default=1)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--nodes", type=_positive_int, default=40, help="lines plus depot")
    p.add_argument("--spacing", type=float, default=10.0, help="line spacing in meters")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("instance")
    p.add_argument("--objective", choices=OBJECTIVES, default="s")
    p.add_argument("--algo", choices=("oga", "rand"), default="oga")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--no-sort", action="store_true")
    p.add_argument("--no-greedy", action="store_true")
    p.add_argument("--out", default=None)
    _add_run_options(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run algorithms over a suite")
    _add_suite_options(p)
    p.add_argument("--algos", type=_algo_list, default=["rand", "OGA"])
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="run the four operator variants over a suite")
    _add_suite_options(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("oracle", help="exact optimum of a small instance")
    p.add_argument("instance")
    p.add_argument("--objective", choices=OBJECTIVES, default="s")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("plot", help="render a solution as SVG")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--out", required=True)
    p.add_argument("--convergence-out", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"edvrp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"edvrp: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"edvrp: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

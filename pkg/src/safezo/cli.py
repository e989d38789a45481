"""Command-line front end.

::

    safezo run <config> [--seed S] [--replicates R] [--jobs J] [--out DIR]
    safezo sweep <config> --axis {eta,sigma,d} --values v1,v2,...
    safezo audit <ledger.csv> --problem <name> [--config FILE]

Exit codes: 0 success, 2 configuration error, 3 slack exhausted in some
replicate (outputs still written), 4 I/O error. ``audit`` exits 1 when it
finds violations.
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

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .oracle import audit_points, audit_safety, read_ledger_csv
from .problems import problem_from_config
from .solver import SlackExhausted, solve

log = logging.getLogger("safezo")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_SLACK, EXIT_IO = 0, 1, 2, 3, 4

TRAJ_COLS = ("nu", "n", "gamma", "gnorm", "slack", "barrier", "score",
             "cum_measurements")


def _f(v):
    return repr(float(v))


def replicate_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([int(seed), r]).generate_state(1)[0])


def _write_trajectory(path, result, d):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{j + 1}" for j in range(d)] + list(TRAJ_COLS))
        for rnd in result.rounds:
            for rec in rnd.trajectory:
                w.writerow([rec.t, *(_f(v) for v in rec.x), _f(rec.nu), rec.n,
                            _f(rec.gamma), _f(rec.gnorm), _f(rec.slack),
                            _f(rec.barrier), _f(rec.score), rec.cum_measurements])


def run_replicate(problem_cfg: dict, solver_kw: dict, r: int, seed: int,
                  rep_dir: str, write_ledger: bool = True) -> dict:
    """Solve one seeded replicate, write its files and return a summary."""
    problem = problem_from_config(problem_cfg)
    from .config import RunConfig as _RC

    cfg = _RC(problem=dict(problem_cfg), solver=dict(solver_kw)).solver_config(
        seed=replicate_seed(seed, r))
    halted = None
    t0 = time.perf_counter()
    try:
        result = solve(problem, cfg)
    except SlackExhausted as exc:
        result = exc.result
        halted = str(exc)
    wall = time.perf_counter() - t0
    os.makedirs(rep_dir, exist_ok=True)
    _write_trajectory(os.path.join(rep_dir, "trajectory.csv"), result, problem.d)
    if write_ledger:
        result.ledger.to_csv(os.path.join(rep_dir, "ledger.csv"), problem)
    violations = audit_safety(result.ledger, problem)

    xs = [rec.x for rnd in result.rounds for rec in rnd.trajectory]
    X = np.asarray(xs).reshape(-1, problem.d)
    truth = problem.evaluate(X) if len(X) else np.empty((0, problem.m + 1))
    rounds = []
    for rnd in result.rounds:
        entry = {"eta": rnd.eta, "T": rnd.T, "iterations": len(rnd.trajectory),
                 "measurements": rnd.measurements, "stopped_early": rnd.stopped_early,
                 "budget_exhausted": rnd.budget_exhausted, "halted": rnd.halted}
        if len(rnd.trajectory):
            sel = rnd.selected
            entry.update(k=rnd.k, t_selected=sel.t, x_selected=sel.x.tolist(),
                         objective_selected=float(problem.evaluate(sel.x)[0]),
                         lambda_selected=sel.lam.tolist())
        rounds.append(entry)
    return {
        "replicate": r,
        "seed": cfg.seed,
        "rounds": rounds,
        "x_selected": np.asarray(result.x_selected).tolist(),
        "objective_selected": float(problem.evaluate(result.x_selected)[0]),
        "objective_start": float(problem.evaluate(problem.x0)[0]),
        "kkt": None if result.report is None else result.report.to_dict(),
        "N_T": result.N_T,
        "min_slack": result.min_slack,
        "violations": len(violations),
        "violation_rows": [
            [v.t, v.l, v.i, *v.x, v.magnitude] for v in violations
        ],
        "halted": halted,
        "wall_time": wall,
        "trajectory_file": os.path.join(os.path.basename(rep_dir), "trajectory.csv"),
        "_t": [rec.t for rnd in result.rounds for rec in rnd.trajectory],
        "_x": X.tolist(),
        "_objective": truth[:, 0].tolist(),
        "_boundary": (np.min(-truth[:, 1:], axis=1).tolist() if len(X) else []),
    }


def _execute(cfg: RunConfig, out: str, seed: int, jobs: int) -> list:
    solver_kw = dict(cfg.solver)
    args = [(cfg.problem, solver_kw, r, seed, os.path.join(out, f"rep_{r:03d}"),
             bool(cfg.ledger)) for r in range(cfg.replicates)]
    if jobs > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_replicate, *a) for a in args]
            return [f.result() for f in futures]
    return [run_replicate(*a) for a in args]


def _write_aggregate(out: str, cfg: RunConfig, summaries: list, d: int, wall: float):
    with open(os.path.join(out, "safety_audit.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "t", "l", "i"] + [f"x_{j + 1}" for j in range(d)]
                   + ["violation"])
        for s in summaries:
            for row in s["violation_rows"]:
                w.writerow([s["replicate"], row[0], row[1], row[2],
                            *(_f(v) for v in row[3:])])
    with open(os.path.join(out, "objective.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "t", "objective"])
        for s in summaries:
            for t, v in zip(s["_t"], s["_objective"]):
                w.writerow([s["replicate"], t, _f(v)])
    with open(os.path.join(out, "boundary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "t", "boundary_distance"])
        for s in summaries:
            for t, v in zip(s["_t"], s["_boundary"]):
                w.writerow([s["replicate"], t, _f(v)])
    if d == 2:
        with open(os.path.join(out, "trajectory2d.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "t", "x_1", "x_2"])
            for s in summaries:
                for t, x in zip(s["_t"], s["_x"]):
                    w.writerow([s["replicate"], t, _f(x[0]), _f(x[1])])

    reps = [{k: v for k, v in s.items() if not k.startswith("_")
             and k != "violation_rows"} for s in summaries]
    sel = np.asarray([s["x_selected"] for s in summaries])
    report = {
        "config": cfg.flat(),
        "replicates": reps,
        "summary": {
            "replicates": len(summaries),
            "total_violations": sum(s["violations"] for s in summaries),
            "safe_runs": sum(s["violations"] == 0 for s in summaries),
            "halted_runs": sum(s["halted"] is not None for s in summaries),
            "N_T_total": sum(s["N_T"] for s in summaries),
            "selected_spread": float(np.max(np.linalg.norm(sel - sel.mean(axis=0), axis=1))),
            "min_slack": min(s["min_slack"] for s in summaries),
            "wall_time": wall,
        },
    }
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    return report


def cmd_run(cfg: RunConfig, out: str, seed: int, jobs: int) -> int:
    os.makedirs(out, exist_ok=True)
    problem = problem_from_config(cfg.problem)
    t0 = time.perf_counter()
    summaries = _execute(cfg, out, seed, jobs)
    report = _write_aggregate(out, cfg, summaries, problem.d, time.perf_counter() - t0)
    s = report["summary"]
    print(f"{s['replicates']} replicate(s): {s['safe_runs']} safe, "
          f"{s['total_violations']} violations, {s['halted_runs']} halted; "
          f"report in {os.path.join(out, 'report.json')}")
    return EXIT_SLACK if s["halted_runs"] else EXIT_OK


_AXES = {"eta": ("solver", "eta0"), "sigma": ("solver", "sigma"), "d": ("problem", "d")}


def cmd_sweep(cfg: RunConfig, out: str, seed: int, jobs: int, axis: str,
              values: list) -> int:
    section, key = _AXES[axis]
    lowest = 0.0 if axis == "sigma" else np.nextafter(0.0, 1.0)
    if not values or min(values) < lowest:
        raise ConfigError(f"sweep values for {axis} must be positive: {values}")
    if axis == "d" and cfg.problem.get("name") != "random":
        raise ConfigError("a d sweep needs problem.name = random")
    os.makedirs(out, exist_ok=True)
    rows = []
    code = EXIT_OK
    for v in values:
        sub = RunConfig(problem=dict(cfg.problem), solver=dict(cfg.solver),
                        replicates=cfg.replicates, jobs=cfg.jobs, out=cfg.out,
                        ledger=cfg.ledger)
        getattr(sub, section)[key] = int(v) if axis == "d" else v
        sub.validate()
        sub_out = os.path.join(out, f"{axis}={v:g}")
        os.makedirs(sub_out, exist_ok=True)
        problem = problem_from_config(sub.problem)
        t0 = time.perf_counter()
        summaries = _execute(sub, sub_out, seed, jobs)
        _write_aggregate(sub_out, sub, summaries, problem.d, time.perf_counter() - t0)
        for s in summaries:
            iters = sum(r["iterations"] for r in s["rounds"])
            resid = s["kkt"]["residual"] if s["kkt"] else float("nan")
            rows.append([axis, repr(v), s["replicate"], s["N_T"], iters,
                         _f(s["min_slack"]), _f(resid), int(s["halted"] is not None)])
            if s["halted"] is not None:
                code = EXIT_SLACK
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "replicate", "N_T", "iterations", "min_slack",
                    "kkt_residual", "halted"])
        w.writerows(rows)
    print(f"sweep over {axis} = {values}: {len(rows)} runs; "
          f"table in {os.path.join(out, 'sweep.csv')}")
    return code


def cmd_audit(path: str, problem_name: str, config_path=None) -> int:
    problem_cfg = {"name": problem_name}
    if config_path:
        problem_cfg = {**load_config(config_path).problem, "name": problem_name}
    problem = problem_from_config(problem_cfg)
    ledger = read_ledger_csv(path)
    bad = audit_points(ledger.points, problem)
    print(f"{len(ledger)} query rows ({ledger.count} oracle calls), "
          f"{len(bad)} violation(s)")
    w = csv.writer(sys.stdout, lineterminator="\n")
    if bad:
        w.writerow(["row", "t", "l", "i", "violation"])
        for r, i, mag in bad:
            w.writerow([r, int(ledger.t[r]), int(ledger.l[r]), i, _f(mag)])
    return EXIT_VIOLATION if bad else EXIT_OK


def _values(text: str) -> list:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safezo", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--replicates", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--out", default=None)

    common(sub.add_parser("run", help="run seeded replicates of the solver"))
    sw = sub.add_parser("sweep", help="run a parameter sweep")
    common(sw)
    sw.add_argument("--axis", required=True, choices=sorted(_AXES))
    sw.add_argument("--values", required=True, type=_values)
    au = sub.add_parser("audit", help="audit a ledger CSV against ground truth")
    au.add_argument("ledger")
    au.add_argument("--problem", required=True)
    au.add_argument("--config", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "audit":
            return cmd_audit(args.ledger, args.problem, args.config)
        cfg = load_config(args.config)
        if args.replicates is not None:
            cfg.replicates = args.replicates
        if args.jobs is not None:
            cfg.jobs = args.jobs
        cfg.validate()
        seed = args.seed if args.seed is not None else int(cfg.solver.get("seed", 0))
        out = cfg.output_dir(args.out)
        if args.command == "run":
            return cmd_run(cfg, out, seed, cfg.jobs)
        return cmd_sweep(cfg, out, seed, cfg.jobs, args.axis, args.values)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

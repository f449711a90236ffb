"""Command line front end.

    cgqn generate --spec sr1-trap:n=2 --mode rational --out trap.json
    cgqn run      --problem ref.json --method qn --phi const:1
    cgqn verify   --problem ref.json --phi bfgs --mode rational --out report.json
    cgqn sweep    --kind random-spd --n 6 --seeds 20 --phi-grid=-1/2,0,1,3 --out sweep.csv

Exit codes: 0 pass, 1 verification failure (or breakdown for ``run``),
2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import problems
from ._json import encode
from .cg import cg_run
from .linalg import Tolerance
from .qn import Breakdown, parse_schedule, qn_run
from .trace import StopPolicy
from .verify import VERIFY_FLOAT_TOL, verify_equivalence

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SWEEP_COLUMNS = ("seed", "n", "phi_rule", "iterations", "max_angle",
                 "max_delta_deviation", "breakdown_events", "verdict")


class UsageError(Exception):
    pass


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--problem", help="problem JSON file")
    src.add_argument("--spec", help="generator recipe, e.g. random-spd:n=5,seed=3")
    _add_mode_args(p)


def _add_mode_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("rational", "float"), default=None,
                   help="scalar field (default: the problem file's, else rational)")
    p.add_argument("--rtol", type=float, help="float mode: relative zero tolerance")
    p.add_argument("--atol", type=float, help="float mode: absolute zero tolerance")
    p.add_argument("--gtol", type=float, help="float mode: relative gradient stop")
    p.add_argument("--max-iter", type=int, help="float mode: iteration cap (default n)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgqn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a problem file")
    g.add_argument("--spec", required=True)
    g.add_argument("--mode", choices=("rational", "float"), default="rational")
    g.add_argument("--out")

    r = sub.add_parser("run", help="run CG or quasi-Newton and write the trace")
    _add_problem_args(r)
    r.add_argument("--method", choices=("cg", "qn"), default="cg")
    r.add_argument("--phi", default="bfgs", help="phi schedule for --method qn")
    r.add_argument("--no-matrices", action="store_true", help="omit B_k and U_k")
    r.add_argument("--out")

    v = sub.add_parser("verify", help="check quasi-Newton against CG")
    _add_problem_args(v)
    v.add_argument("--phi", required=True,
                   help="bfgs | sr1 | const:<q> | seq:q1,q2,... | degenerate-probe:<k> | random:<seed>")
    v.add_argument("--out")

    s = sub.add_parser("sweep", help="verify over a phi grid x problem seeds, CSV out")
    s.add_argument("--kind", default="random-spd", choices=problems.KINDS)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seeds", type=int, default=10, help="number of seeds")
    s.add_argument("--seed-start", type=int, default=0)
    s.add_argument("--eigs", help="eigenvalues, '|' separated")
    s.add_argument("--cond", type=float)
    s.add_argument("--rotate", action="store_true")
    s.add_argument("--phi", action="append", default=[], help="schedule; repeatable")
    s.add_argument("--phi-grid", help="comma separated constant phi values")
    s.add_argument("--jobs", type=int, default=1)
    _add_mode_args(s)
    s.add_argument("--out")
    return parser


def _tolerances(args, mode: str) -> tuple[Tolerance | None, StopPolicy]:
    given = [f for f in ("rtol", "atol", "gtol", "max_iter") if getattr(args, f) is not None]
    if mode == "rational":
        if given:
            raise UsageError(f"rational mode takes no tolerance flags (got {', '.join(given)})")
        return None, StopPolicy()
    tol = Tolerance(
        rtol=args.rtol if args.rtol is not None else VERIFY_FLOAT_TOL.rtol,
        atol=args.atol if args.atol is not None else VERIFY_FLOAT_TOL.atol,
    )
    stop = StopPolicy(tol=args.gtol if args.gtol is not None else StopPolicy.tol,
                      max_iter=args.max_iter)
    return tol, stop


def _load_problem(args) -> problems.QuadraticProblem:
    if args.problem:
        try:
            prob = problems.load(args.problem)
        except OSError as exc:
            raise UsageError(f"cannot read {args.problem}: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"{args.problem}: {exc}") from None
        return prob.with_mode(args.mode) if args.mode else prob
    try:
        spec = problems.parse_spec(args.spec)
    except ValueError as exc:
        raise UsageError(f"bad --spec: {exc}") from None
    return problems.generate(spec, args.mode or "rational")


def _schedule(text: str):
    try:
        return parse_schedule(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_generate(args) -> int:
    try:
        prob = problems.generate(problems.parse_spec(args.spec), args.mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(problems.dumps(prob) + "\n", args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    prob = _load_problem(args)
    tol, stop = _tolerances(args, prob.mode)
    code = EXIT_OK
    payload = {"config": _config(args), "problem": problems.to_dict(prob)}
    if args.method == "cg":
        trace = cg_run(prob, stop)
    else:
        try:
            trace = qn_run(prob, _schedule(args.phi), stop, tol)
        except Breakdown as exc:
            trace = exc.trace
            payload["breakdown"] = exc.to_dict()
            code = EXIT_FAIL
    payload["trace"] = trace.to_dict(with_matrices=not args.no_matrices)
    _emit(_dump(encode(payload)), args.out)
    return code


def cmd_verify(args) -> int:
    prob = _load_problem(args)
    tol, stop = _tolerances(args, prob.mode)
    sched = _schedule(args.phi)
    report = verify_equivalence(prob, sched, tol, stop)
    payload = {
        "config": _config(args),
        "problem": problems.to_dict(prob),
        "report": report.to_dict(),
    }
    _emit(_dump(payload), args.out)
    return EXIT_OK if report.verdict else EXIT_FAIL


def _sweep_cell(cell):
    spec, mode, sched_text, tol, stop = cell
    prob = problems.generate(spec, mode)
    report = verify_equivalence(prob, parse_schedule(sched_text), tol, stop)
    events = ";".join(
        f"{e['kind']}@{e['k']}({'predicted' if e['predicted'] else 'unexpected'})"
        for e in report.events)
    return {
        "seed": spec.seed,
        "n": spec.n,
        "phi_rule": sched_text,
        "iterations": report.qn_iterations,
        "max_angle": repr(report.max_angle),
        "max_delta_deviation": repr(report.max_delta_deviation),
        "breakdown_events": events,
        "verdict": "pass" if report.verdict else "fail",
    }


def cmd_sweep(args) -> int:
    mode = args.mode or "rational"
    tol, stop = _tolerances(args, mode)
    grid = list(args.phi)
    if args.phi_grid is not None:
        grid += [f"const:{v.strip()}" for v in args.phi_grid.split(",") if v.strip()]
    if not grid:
        raise UsageError("empty phi grid")
    for text in grid:
        _schedule(text)
    if args.seeds < 1:
        raise UsageError("--seeds must be positive")
    eigs = None
    if args.eigs:
        eigs = tuple(args.eigs.split("|"))
    try:
        specs = [problems.ProblemSpec(args.kind, args.n, seed, eigs, args.cond, args.rotate)
                 for seed in range(args.seed_start, args.seed_start + args.seeds)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cells = [(spec, mode, text, tol, stop) for spec in specs for text in grid]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    order = {text: i for i, text in enumerate(grid)}
    rows.sort(key=lambda r: (r["seed"], order[r["phi_rule"]]))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.out)
    failed = mode == "rational" and any(r["verdict"] == "fail" for r in rows)
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cgqn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

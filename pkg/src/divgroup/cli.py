"""Command line front end.

Subcommands: solve (barriers, value grid, serialized solution), verify
(check report, exit 3 on hard failure), simulate (policy value estimates,
optionally across barrier scales), explicit2 (closed-form cross-check for
two lines), barriers (print the table).  Configs are JSON files; the names
fig1, symmetric2 and chain3 resolve to bundled examples.

Numeric CSV cells are written with 17 significant digits and newline line
endings, so reruns are byte identical.  Exit codes: 1 invalid config or
arguments, 2 solver failure, 3 hard verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from .expfun import ContractViolationError
from .explicit2 import RootCollisionError, solve_explicit2
from .model import ConfigError, DefaultState, ModelParams, params_from_config
from .recursion import PolicySolution, SolveError, solve_all, value
from .simulate import BarrierPolicy, SimConfig, compare_policies
from .verify import GridSpec, run_all
from .vi_solver import ConstructionError, NoBoundaryError

BUNDLED = ("fig1", "symmetric2", "chain3")
_SOLVER_ERRORS = (
    SolveError, NoBoundaryError, ConstructionError, RootCollisionError, ContractViolationError,
)


def _fmt(x: float) -> str:
    return "{:.17g}".format(float(x))


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _load_params(name: str) -> ModelParams:
    p = Path(name)
    if p.exists():
        text = p.read_text(encoding="utf-8")
    else:
        stem = name[:-5] if name.endswith(".json") else name
        if stem in BUNDLED:
            text = resources.files("divgroup").joinpath(f"configs/{stem}.json").read_text("utf-8")
        else:
            raise ConfigError(
                f"config {name!r} is neither a file nor one of the bundled names {', '.join(BUNDLED)}"
            )
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {name!r} is not valid JSON: {exc}") from exc
    return params_from_config(doc)


def _parse_floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma separated numbers, got {text!r}") from exc
    if not vals:
        raise ConfigError(f"{flag} must contain at least one number")
    return vals


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid_spec(args: argparse.Namespace) -> GridSpec:
    kw = {}
    if getattr(args, "grid_points", None) is not None:
        kw["points_per_axis"] = args.grid_points
    if getattr(args, "tol", None) is not None:
        kw["residual_tol"] = args.tol
    return GridSpec(**kw)


def _barrier_rows(sol: PolicySolution) -> list[list[str]]:
    return [
        [state_bits, str(i), _fmt(m), _fmt(c)]
        for state_bits, i, m, c in sol.barriers_table()
    ]


def _cmd_solve(args: argparse.Namespace) -> int:
    params = _load_params(args.config)
    sol = solve_all(params)
    out = _out_dir(args)
    _write_csv(out / "barriers.csv", ["state", "subsidiary", "barrier", "constant"],
               _barrier_rows(sol))
    points = args.grid_points if args.grid_points is not None else 200
    grid_rows = []
    for state in params.states():
        for i in state.surviving:
            s = sol.solution(i, state)
            import numpy as np

            xs = np.linspace(0.0, s.m + 1.0, points)
            for x, v in zip(xs, s.f.eval_many(xs)):
                grid_rows.append([state.bitstring, str(i), _fmt(x), _fmt(v)])
    _write_csv(out / "value_grid.csv", ["state", "subsidiary", "x", "value"], grid_rows)
    with open(out / "solution.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sol.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written = ["barriers.csv", "value_grid.csv", "solution.json"]
    if not args.no_plots:
        from . import plots

        plots.value_function_figure(sol, str(out / "value_functions.png"))
        plots.barrier_figure(sol, str(out / "barriers.png"))
        written += ["value_functions.png", "barriers.png"]
    print(f"solved {params.n} lines, {1 << params.n} states; wrote " + ", ".join(written))
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    params = _load_params(args.config)
    sol = solve_all(params)
    report = run_all(sol, _grid_spec(args))
    out = _out_dir(args)
    rows = [
        [name, _fmt(viol), _fmt(tol), status, kind, loc]
        for name, viol, tol, status, kind, loc in report.rows()
    ]
    _write_csv(out / "report.csv",
               ["check", "max_violation", "tolerance", "status", "kind", "location"], rows)
    n_hard = sum(1 for e in report.entries if e.hard)
    print(f"{len(report.entries)} checks ({n_hard} hard); wrote report.csv")
    if not report.passed:
        for e in report.hard_failures:
            print(f"FAIL {e.name}: {e.max_violation:.3e} > {e.tol:.3e} at {e.location}",
                  file=sys.stderr)
        return 3
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    params = _load_params(args.config)
    sol = solve_all(params)
    z0 = DefaultState.from_bitstring(args.z0, params.n) if args.z0 else DefaultState.all_alive(params.n)
    if args.x0:
        x0 = _parse_floats(args.x0, "--x0")
        if len(x0) != params.n:
            raise ConfigError(f"--x0 needs {params.n} entries, got {len(x0)}")
    else:
        # default start: halfway to each surviving barrier
        x0 = tuple(
            0.0 if z0.is_defaulted(i) else 0.5 * sol.barrier(i, z0)
            for i in range(1, params.n + 1)
        )
    horizon = args.horizon if args.horizon is not None else 20.0 / params.discount
    cfg = SimConfig(dt=args.dt, horizon=horizon, paths=args.paths, seed=args.seed)
    scales = _parse_floats(args.perturb, "--perturb") if args.perturb else (1.0,)
    rows = compare_policies(params, sol, scales, x0, z0, cfg)
    out = _out_dir(args)
    header = ["policy_scale", "estimate", "std_error", "paths", "tail_bound", "bound_breaches"]
    header += [f"line{i}" for i in range(1, params.n + 1)]
    csv_rows = []
    for row in rows:
        r = row.result
        cells = [_fmt(row.scale), _fmt(r.estimate), _fmt(r.std_error), str(r.paths_used),
                 _fmt(r.tail_bound), str(r.bound_breaches)]
        cells += [_fmt(v) for v in r.per_subsidiary]
        csv_rows.append(cells)
    _write_csv(out / "sim.csv", header, csv_rows)
    analytic = value(sol, x0, z0)
    written = ["sim.csv"]
    if not args.no_plots:
        from . import plots

        plots.simulation_figure(rows, str(out / "sim.png"), analytic=analytic)
        written.append("sim.png")
    print(f"analytic value at x0: {_fmt(analytic)}")
    for row in rows:
        r = row.result
        print(f"scale {row.scale:g}: estimate {r.estimate:.6f} (s.e. {r.std_error:.6f}, "
              f"{r.paths_used} paths)")
    print("wrote " + ", ".join(written))
    return 0


def _cmd_explicit2(args: argparse.Namespace) -> int:
    params = _load_params(args.config)
    sol = solve_all(params)
    ex = solve_explicit2(params)
    import numpy as np

    alive = DefaultState.all_alive(2)
    rows = []
    worst = 0.0
    for i in (1, 2):
        line = ex.line(i)
        gen = sol.solution(i, alive)
        xs = np.linspace(0.0, line.m_both + 1.0, 200)
        diff_f = float(np.abs(line.f.eval_many(xs) - gen.f.eval_many(xs)).max())
        single_state = alive.with_default(3 - i)
        gen_single = sol.solution(i, single_state)
        diff_single = float(np.abs(line.f_single.eval_many(xs) - gen_single.f.eval_many(xs)).max())
        pairs = [
            ("barrier_both_alive", abs(line.m_both - gen.m)),
            ("constant_both_alive", abs(line.c_both - gen.C)),
            ("value_both_alive", diff_f),
            ("barrier_after_other_default", abs(line.m_single - gen_single.m)),
            ("value_after_other_default", diff_single),
        ]
        for quantity, diff in pairs:
            rows.append([str(i), quantity, _fmt(diff)])
            worst = max(worst, diff)
    out = _out_dir(args)
    _write_csv(out / "comparison.csv", ["subsidiary", "quantity", "max_abs_diff"], rows)
    print(f"closed form vs recursion: worst difference {worst:.3e}; wrote comparison.csv")
    return 0


def _cmd_barriers(args: argparse.Namespace) -> int:
    params = _load_params(args.config)
    sol = solve_all(params)
    print(f"{'state':>8} {'subsidiary':>10} {'barrier':>22} {'constant':>22}")
    for state_bits, i, m, c in sol.barriers_table():
        print(f"{state_bits:>8} {i:>10d} {m:>22.16g} {c:>22.16g}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="divgroup",
        description="Optimal dividend barriers for an insurance group under default contagion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out: bool = True) -> None:
        p.add_argument("--config", required=True,
                       help="JSON config path, or a bundled name: " + ", ".join(BUNDLED))
        if out:
            p.add_argument("--out", default=".", help="output directory (default: .)")

    p = sub.add_parser("solve", help="solve and write barriers, value grid, solution")
    common(p)
    p.add_argument("--grid-points", type=int, default=None, help="value grid points per axis")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("verify", help="run all checks, write report.csv")
    common(p)
    p.add_argument("--tol", type=float, default=None, help="override the residual tolerance")
    p.add_argument("--grid-points", type=int, default=None, help="check grid points per axis")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of the policy value")
    common(p)
    p.add_argument("--x0", default=None, help="comma separated start surpluses")
    p.add_argument("--z0", default=None, help="initial default state bitstring")
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=None,
                   help="truncation time (default: 20 / discount)")
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--perturb", default=None,
                   help="comma separated barrier scales to compare (default: 1.0)")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("explicit2", help="closed-form two-line cross-check")
    common(p)
    p.set_defaults(func=_cmd_explicit2)

    p = sub.add_parser("barriers", help="print the barrier table")
    common(p, out=False)
    p.set_defaults(func=_cmd_barriers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _SOLVER_ERRORS as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: solve, sweep, simulate, verify.

Problem files are JSON with row-major nested arrays for matrices and plain
floats elsewhere; numbers are emitted in shortest round-trip decimal form so
a file written by the tool re-parses to the identical problem. Exit codes:
0 success, 2 validation failure, 3 solver non-convergence, 4 verification
failure. Set LQGSCHED_OUT_DIR to prefix relative --out paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys

import numpy as np

from .model import CostModel, LinearSystem, Problem, validate
from .oracle import verify_solution
from .policy import NonFiniteSearch, optimal_period, value_at
from .riccati import NonConvergence, lyapunov_solve, spectral_radius
from .sim import (
    ALWAYS_MEASURE,
    NEVER_MEASURE,
    OPTIMAL,
    SimConfig,
    Strategy,
    fixed_period,
    monte_carlo_value,
    simulate,
)

__all__ = ["main", "entry", "load_problem", "save_problem"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_VERIFICATION = 4


def load_problem(path: str, O_override: float | None = None) -> Problem:
    with open(path) as fh:
        d = json.load(fh)
    sys_ = LinearSystem(A=d["A"], B=d["B"], C=d["C"], Sigma_S=d["Sigma_S"])
    O = float(d.get("O", 0.0)) if O_override is None else float(O_override)
    cost = CostModel(Q=d["Q"], R=d["R"], beta=float(d["beta"]), O=O)
    return Problem(sys=sys_, cost=cost, x0=d.get("x0"))


def save_problem(problem: Problem, path: str) -> None:
    d = {
        "A": problem.sys.A.tolist(),
        "B": problem.sys.B.tolist(),
        "C": problem.sys.C.tolist(),
        "Sigma_S": problem.sys.Sigma_S.tolist(),
        "Q": problem.cost.Q.tolist(),
        "R": problem.cost.R.tolist(),
        "beta": problem.cost.beta,
        "O": problem.cost.O,
        "x0": problem.x0.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")


def _resolve_out(path: str | None) -> str | None:
    if path is None:
        return None
    base = os.environ.get("LQGSCHED_OUT_DIR")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(text: str, out: str | None) -> None:
    out = _resolve_out(out)
    if out is None:
        _sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _fail(args, code: int, payload: dict, human: str) -> int:
    if getattr(args, "format", "text") == "json":
        _sys.stdout.write(json.dumps({"error": payload}) + "\n")
    else:
        _sys.stderr.write(human + "\n")
    return code


def _matrix_rows(M: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(M)]


def _fmt_matrix(name: str, M: np.ndarray) -> str:
    rows = "\n".join("    [" + ", ".join(repr(float(v)) for v in row) + "]" for row in np.atleast_2d(M))
    return f"{name}:\n{rows}"


def _solve_problem(problem: Problem):
    violations = validate(problem)
    if violations:
        raise _ValidationFailure(violations)
    return optimal_period(problem.sys, problem.cost)


class _ValidationFailure(Exception):
    def __init__(self, violations):
        self.violations = violations


def cmd_solve(args) -> int:
    problem = load_problem(args.problem, args.O)
    try:
        ps = _solve_problem(problem)
    except _ValidationFailure as e:
        return _fail(
            args, EXIT_VALIDATION,
            {"code": "validation", "violations": [{"code": v.code, "message": v.message} for v in e.violations]},
            "validation failed:\n" + "\n".join(f"  {v}" for v in e.violations),
        )
    except (NonConvergence, NonFiniteSearch) as e:
        return _fail(args, EXIT_CONVERGENCE, {"code": "non_convergence", "message": str(e)}, f"solver failed: {e}")

    vals = value_at(ps, problem.x0)
    eig_mags = sorted(np.abs(np.linalg.eigvals(problem.sys.A)).tolist(), reverse=True)
    stable = spectral_radius(problem.sys.A) < 1.0 - 1e-9
    W = lyapunov_solve(problem.sys) if stable else None

    if args.format == "json":
        doc = {
            "case": ps.case_id.value,
            "T_star": None if not ps.finite else ps.period,
            "r": ps.r,
            "O": ps.O,
            "P": _matrix_rows(ps.are.P),
            "K": _matrix_rows(ps.are.K),
            "phi": _matrix_rows(ps.are.phi),
            "eigenvalue_magnitudes": eig_mags,
            "V": vals.V,
            "V_s": vals.V_s,
            "V_c": vals.V_c,
            "V_e": vals.V_e,
            "V_e_excluding_noise": vals.V_e_excluding_noise,
            "V_reported": vals.V_reported,
            "V_s_reported": vals.V_s_reported,
            "never_measure_threshold": ps.never_threshold,
            "W_infinity": None if W is None else _matrix_rows(W),
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        lines = [
            f"case: {ps.case_id.value}",
            f"T_star: {'inf' if not ps.finite else ps.period}",
            f"r: {ps.r!r}",
            f"O: {ps.O!r}",
            _fmt_matrix("P", ps.are.P),
            _fmt_matrix("K", ps.are.K),
            _fmt_matrix("phi", ps.are.phi),
            "eigenvalue_magnitudes: " + ", ".join(repr(v) for v in eig_mags),
            f"V(x0): {vals.V!r}",
            f"V_s(x0): {vals.V_s!r}",
            f"V_c(x0): {vals.V_c!r}",
            f"V_e(x0): {vals.V_e!r}",
            f"V_e_excluding_noise(x0): {vals.V_e_excluding_noise!r}",
            f"V_reported(x0): {vals.V_reported!r}",
            f"V_s_reported(x0): {vals.V_s_reported!r}",
        ]
        if ps.never_threshold is not None:
            lines.append(f"never_measure_threshold: {ps.never_threshold!r}")
        if W is not None:
            lines.append(_fmt_matrix("W_infinity", W))
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _sweep_prices(args) -> list[float]:
    if args.O_log is not None:
        if args.O_min is None or args.O_max is None:
            raise ValueError("--O-log requires --O-min and --O-max")
        if args.O_min <= 0:
            raise ValueError("--O-min must be positive for a log sweep")
        return list(np.geomspace(args.O_min, args.O_max, int(args.O_log)))
    if args.O_min is None or args.O_max is None or args.O_step is None:
        raise ValueError("sweep needs --O-min, --O-max and --O-step (or --O-log)")
    if args.O_step <= 0:
        raise ValueError("--O-step must be positive")
    out = []
    O = args.O_min
    while O <= args.O_max + 1e-12:
        out.append(float(O))
        O += args.O_step
    return out


def cmd_sweep(args) -> int:
    try:
        prices = _sweep_prices(args)
    except ValueError as e:
        return _fail(args, EXIT_VALIDATION, {"code": "bad_range", "message": str(e)}, str(e))
    problem = load_problem(args.problem)
    violations = validate(
        Problem(sys=problem.sys, cost=CostModel(problem.cost.Q, problem.cost.R, problem.cost.beta, 0.0), x0=problem.x0)
    )
    if violations:
        return _fail(
            args, EXIT_VALIDATION,
            {"code": "validation", "violations": [{"code": v.code, "message": v.message} for v in violations]},
            "validation failed:\n" + "\n".join(f"  {v}" for v in violations),
        )

    beta = problem.cost.beta
    rows = []
    for O in prices:
        cost = CostModel(problem.cost.Q, problem.cost.R, beta, O)
        try:
            ps = optimal_period(problem.sys, cost)
        except (NonConvergence, NonFiniteSearch) as e:
            return _fail(args, EXIT_CONVERGENCE, {"code": "non_convergence", "message": str(e)}, str(e))
        vals = value_at(ps, problem.x0)
        if ps.finite:
            T = ps.period
            saving = beta * O / (1.0 - beta) - beta**T * O / (1.0 - beta**T)
            T_repr = str(T)
        else:
            saving = beta * O / (1.0 - beta)
            T_repr = "inf"
        rows.append(
            [repr(float(O)), T_repr, repr(ps.r), repr(vals.V), repr(vals.V_s), repr(vals.V_e),
             repr(saving), repr(vals.V_reported), repr(vals.V_s_reported)]
        )

    header = "O,T_star,r,V,V_s,V_e,saving,V_reported,V_s_reported"
    text = header + "\n" + "\n".join(",".join(r) for r in rows) + "\n"
    if args.format == "json":
        keys = header.split(",")
        docs = []
        for r in rows:
            d = {}
            for k, v in zip(keys, r):
                if k == "T_star":
                    d[k] = None if v == "inf" else int(v)
                else:
                    d[k] = float(v)
            docs.append(d)
        text = json.dumps(docs, indent=2) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _parse_strategy(token: str) -> Strategy:
    if token == "optimal":
        return OPTIMAL
    if token == "always":
        return ALWAYS_MEASURE
    if token == "never":
        return NEVER_MEASURE
    if token.startswith("fixed:"):
        return fixed_period(int(token.split(":", 1)[1]))
    raise ValueError(f"unknown strategy {token!r} (use optimal|always|never|fixed:T)")


def cmd_simulate(args) -> int:
    problem = load_problem(args.problem, args.O)
    try:
        strategy = _parse_strategy(args.strategy)
    except ValueError as e:
        return _fail(args, EXIT_VALIDATION, {"code": "bad_strategy", "message": str(e)}, str(e))
    try:
        ps = _solve_problem(problem)
    except _ValidationFailure as e:
        return _fail(
            args, EXIT_VALIDATION,
            {"code": "validation", "violations": [{"code": v.code, "message": v.message} for v in e.violations]},
            "validation failed:\n" + "\n".join(f"  {v}" for v in e.violations),
        )
    except (NonConvergence, NonFiniteSearch) as e:
        return _fail(args, EXIT_CONVERGENCE, {"code": "non_convergence", "message": str(e)}, f"solver failed: {e}")

    cfg = SimConfig(horizon=args.horizon, seed=args.seed, n_runs=args.runs, strategy=strategy)
    rec = simulate(problem, ps, cfg)

    summary = {
        "realized_discounted_cost": rec.total_cost,
        "n_measurements": rec.n_measurements,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "strategy": args.strategy,
    }
    if args.runs > 1:
        mean, se = monte_carlo_value(problem, ps, cfg)
        summary["mc_mean"] = mean
        summary["mc_std_error"] = se
        summary["n_runs"] = args.runs

    out = _resolve_out(args.out)
    if out is None:
        _sys.stdout.write(rec.csv_text())
        _sys.stderr.write(json.dumps(summary) + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(rec.csv_text())
        _sys.stdout.write(json.dumps(summary) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    problem = load_problem(args.problem, args.O)
    try:
        ps = _solve_problem(problem)
    except _ValidationFailure as e:
        return _fail(
            args, EXIT_VALIDATION,
            {"code": "validation", "violations": [{"code": v.code, "message": v.message} for v in e.violations]},
            "validation failed:\n" + "\n".join(f"  {v}" for v in e.violations),
        )
    except (NonConvergence, NonFiniteSearch) as e:
        return _fail(args, EXIT_CONVERGENCE, {"code": "non_convergence", "message": str(e)}, f"solver failed: {e}")

    report = verify_solution(problem.sys, problem.cost, ps, x_probe=problem.x0)
    doc = {
        "passed": report.passed,
        "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in report.checks],
        "r_oracle": report.oracle.r_oracle,
        "T_oracle": report.oracle.T_oracle,
        "grid_capped": report.oracle.grid_capped,
        "convergence_iters": report.oracle.convergence_iters,
        "f_curve": [[float(T), float(f)] for T, f in report.oracle.f_curve],
    }
    if report.grid_capped_note:
        doc["note"] = report.grid_capped_note
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    if not report.passed:
        _sys.stderr.write("verification failed: " + ", ".join(report.failures()) + "\n")
        return EXIT_VERIFICATION
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqgsched",
        description=(
            "Co-design of feedback control and paid measurement scheduling for "
            "discounted LQG systems. Exit codes: 0 ok, 2 validation failure, "
            "3 solver non-convergence, 4 verification failure."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_O=True):
        p.add_argument("--problem", required=True, help="problem JSON file")
        if with_O:
            p.add_argument("--O", type=float, default=None, help="per-measurement price (overrides file)")
        p.add_argument("--out", default=None, help="output path (relative paths honor LQGSCHED_OUT_DIR)")
        p.add_argument("--format", choices=["text", "json", "csv"], default="text")

    p = sub.add_parser("solve", help="solve the schedule and report values")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="sweep the measurement price and tabulate the schedule")
    common(p, with_O=False)
    p.add_argument("--O-min", dest="O_min", type=float, default=None)
    p.add_argument("--O-max", dest="O_max", type=float, default=None)
    p.add_argument("--O-step", dest="O_step", type=float, default=None)
    p.add_argument("--O-log", dest="O_log", type=int, default=None, help="number of log-spaced points")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="run the seeded closed loop and export the trajectory CSV")
    common(p)
    p.add_argument("--horizon", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--strategy", default="optimal", help="optimal|always|never|fixed:T")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="cross-check the analytic schedule against the oracle")
    common(p)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()

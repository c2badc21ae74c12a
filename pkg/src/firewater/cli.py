"""Command-line front end.

Exit codes: 0 success, 1 bad input or I/O failure, 2 the algorithm did not
converge (whatever was computed is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

from . import analysis
from .ccd import CcdConfig, StageError, solve_low_branch, solve_multicontrol
from .model import BASE, DomainError, Grid, ModelParams, load_params, switching_point
from .numerics import ConvergenceError, QuadFit
from .shooting import WATER
from .steady_state import SteadyStateError, find_steady_states, steady_ccd

log = logging.getLogger("firewater")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
BUNDLED = ("base.cfg", "quadratic.cfg")


class InputError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def load_config(path) -> ModelParams:
    if path is None:
        return BASE
    p = Path(path)
    if not p.exists() and p.name in BUNDLED and p.parent == Path("."):
        log.info("using bundled %s", p.name)
        with resources.as_file(resources.files("firewater") / "data" / p.name) as bundled:
            return load_params(bundled)
    try:
        return load_params(p)
    except OSError as err:
        raise InputError(f"cannot read parameter file {path}: {err.strerror or err}") from err
    except (ValueError, DomainError) as err:
        raise InputError(str(err)) from err


def _summary(args, p, extra, t0):
    out = {"command": args.command, "params": p.to_dict(), **extra}
    if args.timing:
        out["runtime_s"] = time.perf_counter() - t0
    return out


def _low_threshold(p):
    roots = find_steady_states(p, WATER, 0.0, 1e-10, switching_point(p))
    unstable = [s.x_s for s in roots if s.stability == "unstable"]
    return unstable[0] if unstable else 0.0


def cmd_solve(args, p, t0):
    grid = Grid(args.horizon, args.steps)
    branch = args.branch
    if branch == "auto":
        branch = "low" if args.x0 < _low_threshold(p) else "high"
    try:
        if branch == "low":
            res = solve_low_branch(p, grid, args.x0)
        else:
            cfg = CcdConfig(tol_K=args.tol_k, max_cycles=args.max_cycles, shoot_tol=args.shoot_tol)
            res = solve_multicontrol(p, grid, args.x0, cfg)
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED
    tr = res.trajectory
    if args.out:
        write_csv(args.out, ["t", "x", "u", "v", "lambda"],
                  zip(tr.t, tr.x, tr.u, tr.v, tr.lam))
    summary = _summary(args, p, {
        "branch": branch, "x0": args.x0, "horizon": args.horizon, "steps": args.steps,
        "K_water": res.K_water, "K_fire": res.K_fire, "cycles": res.cycles,
        "converged": res.converged, "cost": res.cost,
        "tail_bound": analysis.tail_bound(p, tr),
        "residuals": {k: float(v.residual) for k, v in res.stages.items()},
        "transversality_met": all(float(v.residual) <= args.shoot_tol for v in res.stages.values()),
        "x_T": float(tr.x[-1]),
    }, t0)
    write_json(args.json, summary)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def _steady_row(p, s):
    return [p.gamma, p.beta, s.branch, s.x_s, s.u_s, s.v_s, s.stability, s.cost_rate(p)]


def cmd_steady(args, p, t0):
    rows = []
    status = EXIT_OK
    if args.branch in ("low", "all"):
        for s in find_steady_states(p, WATER, 0.0, args.x_min, switching_point(p)):
            rows.append(_steady_row(p, s))
    if args.branch in ("high", "all"):
        try:
            rows.append(_steady_row(p, steady_ccd(p)))
        except SteadyStateError as err:
            print(f"error: {err}", file=sys.stderr)
            status = EXIT_NONCONVERGED
    header = ["gamma", "beta", "branch", "x_s", "u_s", "v_s", "stability", "cost_rate"]
    if args.out:
        write_csv(args.out, header, rows)
    print("  ".join(f"{h:>10}" for h in header))
    for r in rows:
        print("  ".join(f"{v:>10}" if isinstance(v, str) else f"{v:>10.6g}" for v in r))
    return status


def cmd_sweep(args, p, t0):
    pts = analysis.sweep_gamma_beta(p, tuple(args.gamma[:2]), args.gamma[2],
                                    tuple(args.beta[:2]), args.beta[2], jobs=args.jobs)
    write_csv(args.out, ["gamma", "beta", "x_s", "u_s", "v_s", "cost_rate", "error"],
              ([pt.gamma, pt.beta, pt.x_s, pt.u_s, pt.v_s, pt.cost_rate, pt.error] for pt in pts))
    failed = sum(not pt.ok for pt in pts)
    print(f"{len(pts)} points, {failed} failed -> {args.out}")
    return EXIT_OK if not failed else EXIT_NONCONVERGED


def _read_sweep(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as err:
        raise InputError(f"cannot read sweep file {path}: {err}") from err
    try:
        return [analysis.SweepPoint(float(r["gamma"]), float(r["beta"]), float(r["x_s"]),
                                    float(r["u_s"]), float(r["v_s"]), float(r["cost_rate"]),
                                    error=r.get("error", ""))
                for r in rows]
    except (KeyError, ValueError) as err:
        raise InputError(f"malformed sweep file {path}: {err}") from err


def cmd_fit(args, p, t0):
    fit = analysis.fit_sweep(_read_sweep(args.sweep))
    payload = {"a0": fit.a0, "a1": fit.a1, "a2": fit.a2, "a3": fit.a3, "a4": fit.a4, "r2": fit.r2}
    write_json(args.json, payload)
    return EXIT_OK


def _read_fit(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return QuadFit(*(float(d[k]) for k in ("a0", "a1", "a2", "a3", "a4", "r2")))
    except OSError as err:
        raise InputError(f"cannot read fit file {path}: {err}") from err
    except (KeyError, ValueError, TypeError) as err:
        raise InputError(f"malformed fit file {path}: {err}") from err


def cmd_contour(args, p, t0):
    fit = _read_fit(args.fit)
    betas = analysis.grid_values(*args.beta)
    pairs, skipped = analysis.contour_solve(fit, args.target, betas, tuple(args.gamma_range))
    for b in skipped:
        print(f"warning: no contour point at beta={b}", file=sys.stderr)
    rows = analysis.verify_contour(p, pairs, jobs=args.jobs)
    write_csv(args.out, ["gamma", "beta", "x_s", "u_s", "v_s", "cost"],
              ([r.gamma, r.beta, r.x_s, r.u_s, r.v_s, r.cost_rate] for r in rows))
    print(f"{len(rows)} contour rows -> {args.out}")
    return EXIT_OK if all(r.ok for r in rows) else EXIT_NONCONVERGED


def cmd_dns(args, p, t0):
    try:
        res = analysis.find_dns(p, tuple(args.bracket), Grid(args.horizon, args.steps), tol=args.tol)
    except (ConvergenceError, StageError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED
    write_json(args.json, _summary(args, p, {
        "x_D": res.x_D, "J_low": res.J_low, "J_high": res.J_high, "width": res.width,
        "horizon": args.horizon, "steps": args.steps}, t0))
    return EXIT_OK


def cmd_arrow(args, p, t0):
    cfg = CcdConfig(max_cycles=args.max_cycles, shoot_tol=args.shoot_tol)
    try:
        res = solve_multicontrol(p, Grid(args.horizon, args.steps), args.x0, cfg)
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if not res.converged:
        print(f"error: the dynamic solve did not converge in {res.cycles} cycles; "
              "Arrow's check needs a converged costate", file=sys.stderr)
        return EXIT_NONCONVERGED
    rep = analysis.arrow_check(p, res)
    if args.out:
        write_csv(args.out, ["t", "H0_xx"], rep.samples.tolist())
    write_json(args.json, _summary(args, p, {
        "min_H0_xx": rep.min_H0_xx, "verdict": rep.verdict, "noise_floor": rep.noise_floor,
        "lambda_T_x_T": rep.side_condition, "side_condition_ok": rep.side_ok}, t0))
    return EXIT_OK


def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="firewater", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--params", help="key=value parameter file (default: base case)")
        sp.add_argument("--json", help="summary JSON path (default: standard output)")
        sp.add_argument("--timing", action="store_true", help="add wall time to the summary")

    def dynamic(sp, x0):
        sp.add_argument("--x0", type=_positive(float), default=x0)
        sp.add_argument("--horizon", type=_positive(float), default=100.0)
        sp.add_argument("--steps", type=_positive(int), default=250)
        sp.add_argument("--max-cycles", type=_positive(int), default=20)
        sp.add_argument("--shoot-tol", type=_positive(float), default=1e-5)

    sp = sub.add_parser("solve", help="dynamic optimal path")
    common(sp)
    dynamic(sp, 0.95)
    sp.add_argument("--branch", choices=("auto", "high", "low"), default="auto",
                    help="auto takes the low branch below the unstable low steady state")
    sp.add_argument("--tol-k", type=_positive(float), default=1e-3)
    sp.add_argument("--out", help="trajectory CSV")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("steady", help="steady states from the evolution function")
    common(sp)
    sp.add_argument("--branch", choices=("high", "low", "all"), default="high")
    sp.add_argument("--x-min", type=_positive(float), default=1e-8)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_steady)

    sp = sub.add_parser("sweep", help="steady states over a (gamma, beta) grid")
    common(sp)
    sp.add_argument("--gamma", nargs=3, type=float, default=[0.1, 0.2, 0.01],
                    metavar=("LO", "HI", "STEP"))
    sp.add_argument("--beta", nargs=3, type=float, default=[0.01, 0.02, 0.001],
                    metavar=("LO", "HI", "STEP"))
    sp.add_argument("--jobs", type=_positive(int))
    sp.add_argument("--out", default="sweep.csv")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="quadratic surface through a sweep CSV")
    common(sp)
    sp.add_argument("--sweep", default="sweep.csv")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("contour", help="level set of a fitted surface, re-verified")
    common(sp)
    sp.add_argument("--fit", default="fit.json")
    sp.add_argument("--target", type=float, default=0.4)
    sp.add_argument("--beta", nargs=3, type=float, default=[0.01, 0.02, 0.001],
                    metavar=("LO", "HI", "STEP"))
    sp.add_argument("--gamma-range", nargs=2, type=float, default=[0.1, 0.2])
    sp.add_argument("--jobs", type=_positive(int))
    sp.add_argument("--out", default="contour.csv")
    sp.set_defaults(func=cmd_contour)

    sp = sub.add_parser("dns", help="initial stock where the two branches cost the same")
    common(sp)
    sp.add_argument("--bracket", nargs=2, type=_positive(float), default=[0.011, 0.015])
    sp.add_argument("--horizon", type=_positive(float), default=300.0)
    sp.add_argument("--steps", type=_positive(int), default=750)
    sp.add_argument("--tol", type=_positive(float), default=1e-7)
    sp.set_defaults(func=cmd_dns)

    sp = sub.add_parser("arrow", help="convexity of the derived Hamiltonian along a solve")
    common(sp)
    dynamic(sp, 0.95)
    sp.add_argument("--out", help="CSV of t,H0_xx")
    sp.set_defaults(func=cmd_arrow)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        p = load_config(args.params)
        return args.func(args, p, t0)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

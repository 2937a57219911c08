"""Command line interface.

Subcommands mirror the verification stages: ``classify`` and ``pair``
run the symbolic and box-constant checks, ``certify-ift`` emits the
certificates and the radii ladder, ``critpoint`` and ``morse-check``
exercise a single parameter cell, ``vdc-check`` and ``fresnel`` validate
the one-dimensional estimates, and ``sweep`` runs the full grid.

Exit codes: 0 success, 1 certification or check failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .bounds import AxisBox
from .errors import OscbenchError
from .harness import (
    Problem,
    assemble_problem,
    fresnel_decay,
    refine_t_count,
    refine_tau_grid,
    sweep,
    tau_grid,
    tuned_exponents,
    write_fresnel_report,
)
from .hypotheses import find_good_pair, load_config, pair_evidence
from .polyring import format_poly
from .stphase import decompose_phase, find_critical_point

USAGE_ERROR = 2
CHECK_FAILED = 1


def _load(path: str):
    p = Path(path)
    if not p.is_file():
        print(f"error: config file not found: {path}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)
    try:
        return load_config(p)
    except (ValueError, KeyError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_classify(args) -> int:
    cfg = _load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        problem = assemble_problem(cfg, grid_n=args.grid)
    except OscbenchError as exc:
        print(f"classification failed: {exc}")
        return CHECK_FAILED
    for w in problem.warnings:
        print(f"warning: {w}")
    print(problem.geometry.case.summary())
    out = _out_dir(args)
    (out / "case_report.txt").write_text(problem.geometry.case.summary() + "\n")
    print(f"wrote {out / 'case_report.txt'}")
    return 0


def cmd_pair(args) -> int:
    cfg = _load(args.config)
    F = cfg.form()
    try:
        pair = find_good_pair(F)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if F.nvars - cfg.dim_v_star <= 4:
        print("warning: declared codimension <= 4, search success not guaranteed")
    if pair is None:
        print("none")
        return CHECK_FAILED
    print(f"({pair[0]}, {pair[1]})")
    ev = pair_evidence(F, *pair)
    print(f"determinant form: {format_poly(ev.det_form)}")
    print(f"mixed derivative vanishes: {ev.mixed_vanishes}")
    print(f"diagonal factor valuations in x{pair[0]}: {ev.valuations}")
    print(f"monomial split term counts (f1, g, f2, f0): {ev.split_sizes}")
    return 0


def cmd_certify_ift(args) -> int:
    cfg = _load(args.config)
    try:
        problem = assemble_problem(cfg, grid_n=args.grid)
    except OscbenchError as exc:
        print(f"certification failed: {exc}")
        return CHECK_FAILED
    geom = problem.geometry
    out = _out_dir(args)
    (out / "psi_cert.txt").write_text(geom.psi_cert.to_text() + "\n")
    (out / "morse_cert.txt").write_text(geom.ref_chart.cert.to_text() + "\n")
    (out / "geometry.txt").write_text(geom.summary() + "\n")
    print(geom.summary())
    print(f"wrote certificates under {out}")
    return 0


def _cell_A(problem: Problem, args):
    tau = args.tau
    if args.t is not None:
        t1, t2 = (float(x) for x in args.t.split(","))
    else:
        tstar = tuned_exponents(problem, tau)
        i, j = problem.pair
        t1, t2 = float(tstar[i - 1]), float(tstar[j - 1])
    return (t1 / (2 * math.pi * tau), t2 / (2 * math.pi * tau)), (t1, t2)


def cmd_critpoint(args) -> int:
    cfg = _load(args.config)
    try:
        problem = assemble_problem(cfg, grid_n=args.grid)
    except OscbenchError as exc:
        print(f"certification failed: {exc}")
        return CHECK_FAILED
    geom = problem.geometry
    A, (t1, t2) = _cell_A(problem, args)
    sl = geom.cell_slice(A)
    box = AxisBox.cube(geom.u0, geom.regions.b2_radius)
    res = find_critical_point(sl, box, multi_start=9)
    print(f"tau={args.tau:g} t=({t1:g}, {t2:g}) A=({A[0]:.6g}, {A[1]:.6g})")
    if res.point is None:
        print(f"no critical point in the chart box; witness axis u{res.witness_axis} "
              f"with certified bound {res.witness_bound:.6g}")
        return CHECK_FAILED
    print(f"critical point: ({res.point[0]:.17g}, {res.point[1]:.17g})")
    print(f"residual: {res.residual:.3e}")
    return 0


def cmd_morse_check(args) -> int:
    cfg = _load(args.config)
    try:
        problem = assemble_problem(cfg, grid_n=args.grid)
    except OscbenchError as exc:
        print(f"certification failed: {exc}")
        return CHECK_FAILED
    geom = problem.geometry
    A, (t1, t2) = _cell_A(problem, args)
    sl = geom.cell_slice(A)
    box = AxisBox.cube(geom.u0, geom.regions.b2_radius)
    res = find_critical_point(sl, box, multi_start=9)
    if res.point is None:
        print("cell has no critical point in the chart box; nothing to check")
        return CHECK_FAILED
    chart = decompose_phase(sl, res.point, geom.delta1, geom.case.case_label,
                            grid_n=args.grid or 33)
    chart.certify_morse()
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-chart.delta6, chart.delta6, size=(args.points, 2))
    morse_res = float(np.max(chart.morse_identity_residual(pts[:, 0], pts[:, 1])))
    pts4 = rng.uniform(-chart.delta4, chart.delta4, size=(args.points, 2))
    dec_res = float(np.max(np.abs(
        chart.decomposition_value(pts4[:, 0], pts4[:, 1])
        - chart.centered_phase(pts4[:, 0], pts4[:, 1]))))
    print(chart.summary())
    print(f"normal-form identity residual over {args.points} points: {morse_res:.3e}")
    print(f"decomposition identity residual:   {dec_res:.3e}")
    ok = morse_res < 1e-9 and dec_res < 1e-10
    print("PASS" if ok else "FAIL")
    return 0 if ok else CHECK_FAILED


def cmd_vdc_check(args) -> int:
    from .vdc_trials import run_trials

    trials = run_trials(args.trials, seed=args.seed or 0)
    bad = [t for t in trials if not t.ok]
    worst_first = min(t.bound_first - t.measured for t in trials)
    worst_second = min(t.bound_second - t.measured for t in trials)
    print(f"trials: {len(trials)}  violations: {len(bad)}")
    print(f"smallest slack, curvature-capped bound: {worst_first:.3e}")
    print(f"smallest slack, convexity bound:        {worst_second:.3e}")
    out = _out_dir(args)
    lines = ["tau,c1,c2,measured,bound_first,bound_second"]
    for t in trials:
        lines.append(f"{t.tau:.17g},{t.c1:.17g},{t.c2:.17g},"
                     f"{t.measured:.17g},{t.bound_first:.17g},{t.bound_second:.17g}")
    (out / "vdc_trials.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'vdc_trials.csv'}")
    return 0 if not bad else CHECK_FAILED


def cmd_fresnel(args) -> int:
    report = fresnel_decay(args.tau_min, args.tau_max, args.points)
    print(f"log-log decay slope: {report.slope:.4f} (target -0.5 within 0.05)")
    paths = write_fresnel_report(report, _out_dir(args),
                                 figures=not args.no_figures)
    for p in paths:
        print(f"wrote {p}")
    return 0 if abs(report.slope + 0.5) <= 0.05 else CHECK_FAILED


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        problem = assemble_problem(cfg, grid_n=args.grid)
    except OscbenchError as exc:
        print(f"certification failed: {exc}")
        return CHECK_FAILED
    for w in problem.warnings:
        print(f"warning: {w}")
    taus = tau_grid(args.tau)
    nt = args.nt
    if args.refine:
        taus = refine_tau_grid(taus)
        nt = refine_t_count(nt)
    report = sweep(problem, taus, t_mult=args.tmax_mult, nt=nt,
                   tol_scale=args.tol, tuned_cells=not args.no_tuned_cell,
                   workers=args.workers)
    paths = report.write(_out_dir(args), figures=not args.no_figures)
    print(f"cells: {len(report.cells)}  c_hat: {report.c_hat:.6e}")
    print(f"branch tally: {report.tally}")
    print(f"flagged cells: {report.flagged}")
    print(f"runtime: {report.runtime_seconds:.1f}s "
          f"({report.evaluations:.3g} kernel evaluations)", file=sys.stderr)
    for p in paths:
        print(f"wrote {p}")
    return 0 if report.flagged == 0 else CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="oscbench",
        description="verification workbench for uniform oscillatory-integral bounds",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="problem config JSON file")
        p.add_argument("--out", default="reports", help="output directory")
        p.add_argument("--grid", type=int, default=None,
                       help="certification grid points per axis")
        p.add_argument("--seed", type=int, default=None, help="seed override")

    p = sub.add_parser("classify", help="certify the case hypotheses on the box")
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("pair", help="search for an admissible axis pair")
    common(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("certify-ift", help="emit map certificates and radii ladder")
    common(p)
    p.set_defaults(func=cmd_certify_ift)

    for name, fn, hlp in (
        ("critpoint", cmd_critpoint, "locate the critical point of one cell"),
        ("morse-check", cmd_morse_check, "verify the normal-form identities"),
    ):
        p = sub.add_parser(name, help=hlp)
        common(p)
        p.add_argument("--tau", type=float, default=100.0)
        p.add_argument("--t", default=None,
                       help="comma pair t_i,t_j (default: tuned critical cell)")
        if name == "morse-check":
            p.add_argument("--points", type=int, default=1000)
        p.set_defaults(func=fn)

    p = sub.add_parser("vdc-check", help="randomized soundness of the 1d bounds")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="reports")
    p.set_defaults(func=cmd_vdc_check)

    p = sub.add_parser("fresnel", help="decay slope of partial Gaussian-phase integrals")
    p.add_argument("--tau-min", type=float, default=10.0)
    p.add_argument("--tau-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--out", default="reports")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_fresnel)

    p = sub.add_parser("sweep", help="grid sweep of the uniform constant")
    common(p)
    p.add_argument("--tau", default="1:1e3:log8",
                   help="tau grid, e.g. 1:1e3:log8 or 1,10,100")
    p.add_argument("--tmax-mult", type=float, default=10.0,
                   help="t range is +-mult*max(1,tau)")
    p.add_argument("--nt", type=int, default=9, help="t points per working axis")
    p.add_argument("--tol", type=float, default=1e-5,
                   help="cell tolerance as a fraction of the trivial bound")
    p.add_argument("--refine", action="store_true",
                   help="refine both grids once (supersets)")
    p.add_argument("--no-tuned-cell", action="store_true",
                   help="skip the per-tau stationary cell")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OscbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CHECK_FAILED
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())

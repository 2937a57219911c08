"""End-to-end sweep orchestration and report serialization.

A sweep measures the weighted oscillatory integral over a grid of
(tau, t) cells, tags every cell with its branch label from the certified
geometry, and reports the empirical uniform constant

    c_hat = max over cells of |I(tau, t)| * max(1, |tau|).

Alongside the rectangular t-grid (frozen-axis exponents zero), each tau
row gets one tuned cell with t_k = -2 pi tau x_k dF/dx_k(x0) on every
axis, which places a stationary point of the full phase at the base
point; these cells exercise the critical branch and carry the slowest
decay, so the constant is measured where it is hardest to achieve.

Reports serialize to JSON (lossless via repr floats) plus a fixed-column
CSV; wall-clock timing stays out of both so reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import CertificationError
from .hypotheses import (
    ProblemConfig,
    Weight,
    build_weight,
    check_declared_dim,
    classify_case,
    find_good_pair,
    resolve_base_point,
)
from .oscquad import batch_phase_integrals
from .polyring import MultiPoly
from .stphase import CRITICAL, LARGE_A, NO_CRITICAL, SliceGeometry, build_geometry


@dataclass
class Problem:
    """A fully assembled problem: form, case, geometry, weight."""

    config: ProblemConfig
    F: MultiPoly
    x0: tuple
    pair: tuple
    geometry: SliceGeometry
    weight: Weight
    warnings: tuple = ()


def assemble_problem(cfg: ProblemConfig, grid_n: Optional[int] = None) -> Problem:
    """Resolve the base point, certify the case, and build the geometry."""
    F = cfg.form()
    rng = np.random.default_rng(cfg.seed)
    warnings = []
    warn = check_declared_dim(F, cfg.dim_v_star, rng)
    if warn:
        warnings.append(warn)
    if F.is_homogeneous() and F.degree() > 1 and F.nvars - cfg.dim_v_star <= 4:
        warnings.append(
            "declared singular-locus dimension leaves codimension <= 4; "
            "the pair search is not guaranteed to succeed")
    pair = cfg.pair or find_good_pair(F)
    if pair is None:
        raise CertificationError("no admissible axis pair found")
    x0 = tuple(float(v) for v in resolve_base_point(cfg))
    gn = grid_n or cfg.grid
    case = classify_case(F, pair[0], pair[1], x0, cfg.delta, grid_n=gn)
    if case.case_label == "NotApplicable":
        raise CertificationError(f"case certification failed: {case.reason}")
    geometry = build_geometry(F, case, x0, delta0=cfg.delta0, grid_n=gn)
    weight = build_weight(x0, cfg.delta0, r=cfg.r)
    return Problem(config=cfg, F=F, x0=x0, pair=tuple(pair), geometry=geometry,
                   weight=weight, warnings=tuple(warnings))


# -- grids -----------------------------------------------------------------------


def tau_grid(spec: str) -> np.ndarray:
    """Parse a tau grid spec: 'a:b:logN', 'a:b:linN', or a comma list."""
    if ":" in spec:
        lo_s, hi_s, kind = spec.split(":")
        lo, hi = float(lo_s), float(hi_s)
        if kind.startswith("log"):
            return np.geomspace(lo, hi, int(kind[3:]))
        if kind.startswith("lin"):
            return np.linspace(lo, hi, int(kind[3:]))
        raise ValueError(f"unknown tau grid kind {kind!r}")
    return np.asarray([float(x) for x in spec.split(",")], dtype=float)


def refine_tau_grid(taus: np.ndarray) -> np.ndarray:
    """Insert geometric midpoints; the result is a superset of the input."""
    taus = np.asarray(taus, dtype=float)
    mids = np.sqrt(taus[:-1] * taus[1:]) if np.all(taus > 0) else \
        0.5 * (taus[:-1] + taus[1:])
    return np.sort(np.concatenate([taus, mids]))


def refine_t_count(nt: int) -> int:
    """Point-doubling refinement that keeps the old grid as a subset."""
    return 2 * nt - 1


def t_axis(tau: float, t_mult: float, nt: int) -> np.ndarray:
    T = t_mult * max(1.0, abs(tau))
    return np.linspace(-T, T, nt)


# -- sweep -----------------------------------------------------------------------


@dataclass
class SweepReport:
    """Grid of measured integrals with branch labels and the constant."""

    fingerprint: str
    name: str
    nvars: int
    tau_values: list
    t_mult: float
    nt: int
    tuned_cells: bool
    tol_scale: float
    cells: list  # per cell: [tau, t (n floats), re, im, err, branch, flagged]
    c_hat: float
    tally: dict
    flagged: int
    evaluations: int
    weight_integral: float
    geometry_text: str
    warnings: list
    runtime_seconds: float = field(default=0.0, compare=False)

    def ratios(self) -> np.ndarray:
        out = []
        for cell in self.cells:
            tau = cell[0]
            mag = math.hypot(cell[self.nvars + 1], cell[self.nvars + 2])
            out.append(mag * max(1.0, abs(tau)))
        return np.asarray(out)

    def to_json(self) -> str:
        payload = {
            "fingerprint": self.fingerprint,
            "name": self.name,
            "nvars": self.nvars,
            "tau_values": self.tau_values,
            "t_mult": self.t_mult,
            "nt": self.nt,
            "tuned_cells": self.tuned_cells,
            "tol_scale": self.tol_scale,
            "cells": self.cells,
            "c_hat": self.c_hat,
            "tally": self.tally,
            "flagged": self.flagged,
            "evaluations": self.evaluations,
            "weight_integral": self.weight_integral,
            "geometry_text": self.geometry_text,
            "warnings": self.warnings,
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SweepReport":
        d = json.loads(text)
        return cls(runtime_seconds=0.0, **d)

    def csv_lines(self) -> list:
        n = self.nvars
        head = "tau," + ",".join(f"t{k}" for k in range(1, n + 1)) + \
            ",re,im,abs,ratio,branch"
        lines = [head]
        for cell in self.cells:
            tau = cell[0]
            ts = cell[1:n + 1]
            re, im = cell[n + 1], cell[n + 2]
            mag = math.hypot(re, im)
            ratio = mag * max(1.0, abs(tau))
            branch = cell[n + 4]
            fields = [f"{tau:.17g}"] + [f"{t:.17g}" for t in ts] + [
                f"{re:.17g}", f"{im:.17g}", f"{mag:.17g}", f"{ratio:.17g}", branch]
            lines.append(",".join(fields))
        return lines

    def write(self, out_dir, figures: bool = True) -> list:
        """Write the JSON report, the CSV, and (optionally) figures."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        jp = out / "sweep_report.json"
        jp.write_text(self.to_json())
        paths.append(jp)
        cp = out / "sweep_cells.csv"
        cp.write_text("\n".join(self.csv_lines()) + "\n")
        paths.append(cp)
        if figures:
            from . import figures as figs
            paths.extend(figs.render_sweep_figures(self, out))
        return paths


def _branch_name(problem: Problem, tau: float, t1: float, t2: float) -> str:
    a1 = t1 / (2.0 * math.pi * tau)
    a2 = t2 / (2.0 * math.pi * tau)
    return problem.geometry.classify_cell((a1, a2)).kind


def tuned_exponents(problem: Problem, tau: float) -> np.ndarray:
    """t_k = -2 pi tau x_k dF/dx_k(x0): full-phase stationarity at x0."""
    F, x0 = problem.F, problem.x0
    n = F.nvars
    vals = np.array([
        x0[k - 1] * float(F.derive(k).eval([float(v) for v in x0]))
        for k in range(1, n + 1)
    ])
    return -2.0 * math.pi * tau * vals


def sweep(problem: Problem, taus: Sequence[float], t_mult: float = 10.0,
          nt: int = 9, tol_scale: float = 1e-5, tuned_cells: bool = True,
          workers: Optional[int] = None) -> SweepReport:
    """Measure every (tau, t) cell, label branches, and report c_hat.

    Cell tolerance scales with the trivial bound: tol = max(1e-13,
    tol_scale * integral(weight) * min(1, 1/|tau|)).  A cell whose two
    staggered-grid values disagree past its tolerance after refinement is
    flagged (and still reported).
    """
    t0 = time.time()
    F, w = problem.F, problem.weight
    i, j = problem.pair
    n = F.nvars
    v_axes = [k for k in range(1, n + 1) if k not in (i, j)]
    wint = w.integral()
    cells = []
    tally = {LARGE_A: 0, NO_CRITICAL: 0, CRITICAL: 0}
    flagged = 0
    evaluations = 0

    for tau in taus:
        tau = float(tau)
        if tau == 0.0:
            raise ValueError("tau = 0 is not part of a sweep grid")
        ts = t_axis(tau, t_mult, nt)
        tol = max(1e-13, tol_scale * wint * min(1.0, 1.0 / abs(tau)))
        vals, errs, flags, ev = batch_phase_integrals(
            F, w, tau, (i, j), ts, ts,
            t_frozen={k: 0.0 for k in v_axes}, tol=tol, workers=workers)
        evaluations += ev
        for p, t1 in enumerate(ts):
            for q, t2 in enumerate(ts):
                branch = _branch_name(problem, tau, t1, t2)
                tally[branch] += 1
                fl = bool(flags[p, q])
                flagged += fl
                tvec = [0.0] * n
                tvec[i - 1], tvec[j - 1] = float(t1), float(t2)
                cells.append([tau] + tvec + [float(vals[p, q].real),
                                             float(vals[p, q].imag),
                                             float(errs[p, q]), branch, fl])
        if tuned_cells:
            tstar = tuned_exponents(problem, tau)
            vals, errs, flags, ev = batch_phase_integrals(
                F, w, tau, (i, j),
                np.array([tstar[i - 1]]), np.array([tstar[j - 1]]),
                t_frozen={k: float(tstar[k - 1]) for k in v_axes},
                tol=tol, workers=workers)
            evaluations += ev
            branch = _branch_name(problem, tau, tstar[i - 1], tstar[j - 1])
            tally[branch] += 1
            fl = bool(flags[0, 0])
            flagged += fl
            cells.append([tau] + [float(v) for v in tstar]
                         + [float(vals[0, 0].real), float(vals[0, 0].imag),
                            float(errs[0, 0]), branch, fl])

    ratios = [
        math.hypot(c[n + 1], c[n + 2]) * max(1.0, abs(c[0])) for c in cells
    ]
    report = SweepReport(
        fingerprint=problem.config.fingerprint(),
        name=problem.config.name,
        nvars=n,
        tau_values=[float(t) for t in taus],
        t_mult=float(t_mult),
        nt=int(nt),
        tuned_cells=bool(tuned_cells),
        tol_scale=float(tol_scale),
        cells=cells,
        c_hat=float(max(ratios)) if ratios else 0.0,
        tally=tally,
        flagged=int(flagged),
        evaluations=int(evaluations),
        weight_integral=float(wint),
        geometry_text=problem.geometry.summary(),
        warnings=list(problem.warnings),
        runtime_seconds=time.time() - t0,
    )
    return report


# -- fresnel decay measurement -----------------------------------------------------


@dataclass
class FresnelReport:
    tau_values: list
    sup_values: list  # max over y of |running integral|
    slope: float

    def to_json(self) -> str:
        return json.dumps(
            {"tau_values": self.tau_values, "sup_values": self.sup_values,
             "slope": self.slope}, sort_keys=True, indent=1)

    def csv_lines(self) -> list:
        lines = ["tau,sup_abs"]
        for t, s in zip(self.tau_values, self.sup_values):
            lines.append(f"{t:.17g},{s:.17g}")
        return lines


def fresnel_decay(tau_min: float = 10.0, tau_max: float = 1e4,
                  points: int = 9, L: float = 1.0, sign: int = 1) -> FresnelReport:
    """Log-log decay slope of the running Gaussian-phase integral sup."""
    from .oscquad import fresnel_profile, fresnel_sup_points

    taus = np.geomspace(tau_min, tau_max, points)
    sups = []
    ys = fresnel_sup_points(L)
    for tau in taus:
        prof = fresnel_profile(ys, L, float(tau), sign)
        sups.append(float(np.max(np.abs(prof))))
    slope = float(np.polyfit(np.log(taus), np.log(sups), 1)[0])
    return FresnelReport([float(t) for t in taus], sups, slope)


def write_fresnel_report(report: FresnelReport, out_dir, figures: bool = True) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "fresnel_report.json", out / "fresnel_decay.csv"]
    paths[0].write_text(report.to_json())
    paths[1].write_text("\n".join(report.csv_lines()) + "\n")
    if figures:
        from . import figures as figs
        paths.append(figs.render_fresnel_figure(report, out))
    return paths

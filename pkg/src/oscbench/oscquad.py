"""Oscillation-aware numerical integration.

Three layers: a generic adaptive 1D rule for complex integrands, partial
Fresnel integrals with quarter-period panel splitting, and the nested
phase integral of a weighted oscillatory integrand over the unit cube.
Closed-form first-derivative bounds for one-dimensional oscillatory
integrals live here too, so randomized soundness trials can compare the
measured integrals against them.

Panels use embedded Gauss-Legendre rules: the 12-point value is accepted
when it agrees with the 6-point value to the panel's share of the
tolerance.  Oscillatory integrands are pre-split so that no panel spans
more than a quarter period at its worst phase rate, which keeps plain
polynomial rules machine-accurate before any error-driven refinement.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds import AxisBox, poly_abs_bound
from .errors import QuadratureError
from .hypotheses import Weight
from .polyring import MultiPoly

_GL_HI = np.polynomial.legendre.leggauss(12)
_GL_LO = np.polynomial.legendre.leggauss(6)
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class QuadResult:
    """Value, accumulated absolute error estimate, and evaluation count."""

    value: complex
    abs_error_estimate: float
    evaluations: int


def integrate_1d(f: Callable, a: float, b: float, tol: float = 1e-10,
                 max_rounds: int = 60, initial_panels: int = 1) -> QuadResult:
    """Adaptive panel bisection with an embedded fixed-order rule.

    ``f`` must accept an ndarray of points and return complex values.
    Panels are accepted when the 12/6-point Gauss difference is below the
    panel's proportional share of ``tol``; the worst panels split until
    the budget holds or the round limit trips.
    """
    if not a < b:
        raise ValueError("need a < b")
    if tol <= 0:
        raise ValueError("tol must be positive")
    xi_h, w_h = _GL_HI
    xi_l, w_l = _GL_LO
    total = b - a
    edges = np.linspace(a, b, initial_panels + 1)
    panels = [(float(lo), float(hi)) for lo, hi in zip(edges[:-1], edges[1:])]
    accepted_val = 0.0 + 0.0j
    accepted_err = 0.0
    evals = 0
    for round_no in range(max_rounds):
        los = np.array([p[0] for p in panels])
        his = np.array([p[1] for p in panels])
        cs = 0.5 * (los + his)
        hs = 0.5 * (his - los)
        pts_h = cs[:, None] + hs[:, None] * xi_h[None, :]
        pts_l = cs[:, None] + hs[:, None] * xi_l[None, :]
        fv_h = np.asarray(f(pts_h.ravel())).reshape(pts_h.shape)
        fv_l = np.asarray(f(pts_l.ravel())).reshape(pts_l.shape)
        evals += pts_h.size + pts_l.size
        hi_vals = (fv_h * w_h[None, :]).sum(axis=1) * hs
        lo_vals = (fv_l * w_l[None, :]).sum(axis=1) * hs
        errs = np.abs(hi_vals - lo_vals)
        budget = tol * (his - los) / total
        ok = errs <= budget
        accepted_val += complex(hi_vals[ok].sum())
        accepted_err += float(errs[ok].sum())
        bad = [i for i in range(len(panels)) if not ok[i]]
        if not bad:
            return QuadResult(accepted_val, accepted_err, evals)
        new_panels = []
        for i in bad:
            lo, hi = panels[i]
            mid = 0.5 * (lo + hi)
            new_panels.extend([(lo, mid), (mid, hi)])
        panels = new_panels
    raise QuadratureError(f"1d subdivision limit ({max_rounds} rounds) exceeded")


# -- Fresnel partial integrals ---------------------------------------------------


def _quarter_period_edges(a: float, b: float, rate: Callable, floor_panels: int = 8,
                          max_panels: int = 2_000_000) -> np.ndarray:
    """Panel edges on [a,b] no wider than a quarter period of the local rate."""
    edges = [a]
    span = b - a
    cap = span / floor_panels
    s = a
    count = 0
    while s < b:
        r = max(rate(s), rate(min(s + cap, b)))
        w = cap if r <= 0 else min(cap, 0.5 * math.pi / r)
        s = min(s + w, b)
        edges.append(s)
        count += 1
        if count > max_panels:
            raise QuadratureError("quarter-period pre-split produced too many panels")
    return np.asarray(edges)


def _gl_panel_sums(f: Callable, edges: np.ndarray) -> tuple:
    """High/low embedded Gauss sums per panel for a vectorized integrand."""
    xi_h, w_h = _GL_HI
    xi_l, w_l = _GL_LO
    cs = 0.5 * (edges[:-1] + edges[1:])
    hs = 0.5 * (edges[1:] - edges[:-1])
    pts_h = cs[:, None] + hs[:, None] * xi_h[None, :]
    pts_l = cs[:, None] + hs[:, None] * xi_l[None, :]
    fh = np.asarray(f(pts_h.ravel())).reshape(pts_h.shape)
    fl = np.asarray(f(pts_l.ravel())).reshape(pts_l.shape)
    hi = (fh * w_h[None, :]).sum(axis=1) * hs
    lo = (fl * w_l[None, :]).sum(axis=1) * hs
    return hi, lo, pts_h.size + pts_l.size


def fresnel_partial(y: float, L: float, tau: float, sign: int) -> QuadResult:
    """The running Gaussian-phase integral from -L to y of e^{2 pi i s^2 sign tau}.

    Panels never exceed a quarter period at the panel's largest |s|, so
    the fixed-order rule is already machine accurate; the embedded
    difference is returned as the error estimate.
    """
    if tau == 0:
        raise ValueError("tau must be nonzero")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not -L <= y <= L:
        raise ValueError("y must lie in [-L, L]")
    if y == -L:
        return QuadResult(0.0 + 0.0j, 0.0, 0)

    at = abs(tau)

    def rate(s):
        return 2.0 * TWO_PI * at * abs(s)

    def f(s):
        ph = TWO_PI * sign * tau * s * s
        return np.exp(1j * ph)

    edges = _quarter_period_edges(-L, y, rate)
    hi, lo, evals = _gl_panel_sums(f, edges)
    return QuadResult(complex(hi.sum()), float(np.abs(hi - lo).sum()), evals)


def fresnel_sup_points(L: float, n_base: int = 129, n_peak: int = 513) -> np.ndarray:
    """Endpoint grid that resolves the narrowing peak of the running integral.

    The modulus peaks within O(tau^-1/2) of the phase minimum, so the
    uniform base grid is densified near the center.
    """
    base = np.linspace(-L, L, n_base)
    peak = np.linspace(-L / 4.0, L / 4.0, n_peak)
    return np.unique(np.concatenate([base, peak]))


def fresnel_profile(ys: np.ndarray, L: float, tau: float, sign: int) -> np.ndarray:
    """Values of the running integral at sorted points ys, shared panels."""
    ys = np.asarray(ys, dtype=float)
    at = abs(tau)

    def rate(s):
        return 2.0 * TWO_PI * at * abs(s)

    def f(s):
        return np.exp(1j * TWO_PI * sign * tau * s * s)

    out = np.empty(ys.shape, dtype=complex)
    acc = 0.0 + 0.0j
    prev = -L
    for k, y in enumerate(ys):
        if y <= prev:
            out[k] = acc
            continue
        edges = _quarter_period_edges(prev, y, rate, floor_panels=2)
        hi, _, _ = _gl_panel_sums(f, edges)
        acc += complex(hi.sum())
        out[k] = acc
        prev = y
    return out


# -- first-derivative bounds ------------------------------------------------------


def vdc_bound_i(geometry: Sequence[float], c1: float, c2: float,
                psi_deriv_max: float, tau: float) -> float:
    """Closed-form bound (2(b-a)/c1 + (b-a)^2 c2/c1^2) max|psi'| / |tau|.

    Valid when |f'| >= c1 > 0 and |f''| <= c2 on [a,b] and the amplitude
    is smooth with support in [a+kappa, b-kappa].
    """
    a, b, kappa = geometry
    if c1 <= 0:
        raise ValueError("c1 must be positive")
    if tau == 0:
        raise ValueError("tau must be nonzero")
    if not b > a:
        raise ValueError("need b > a")
    if kappa < 0 or 2 * kappa >= b - a:
        raise ValueError("support margin kappa incompatible with [a,b]")
    width = b - a
    return (2.0 * width / c1 + width * width * c2 / (c1 * c1)) * psi_deriv_max / abs(tau)


def vdc_bound_ii(geometry: Sequence[float], c1: float,
                 psi_deriv_max: float, tau: float) -> float:
    """Closed-form bound 4(b-a) max|psi'| / (c1 |tau|).

    Valid when additionally f'' is continuous and nonvanishing on [a,b].
    """
    a, b, kappa = geometry
    if c1 <= 0:
        raise ValueError("c1 must be positive")
    if tau == 0:
        raise ValueError("tau must be nonzero")
    if not b > a:
        raise ValueError("need b > a")
    if kappa < 0 or 2 * kappa >= b - a:
        raise ValueError("support margin kappa incompatible with [a,b]")
    return 4.0 * (b - a) * psi_deriv_max / (c1 * abs(tau))


# -- the nested phase integral ----------------------------------------------------


@dataclass(frozen=True)
class PhaseProblem:
    """The weighted oscillatory integrand over the positive unit cube.

    Integrand: weight(x) * prod_k x_k^{i t_k} * exp(2 pi i tau F(x)),
    integrated over the weight support.  ``pair`` names the two working
    axes; the remaining axes are handled by an outer tensor grid.
    ``resolution`` is the floor for the outer per-axis point count.
    """

    F: MultiPoly
    weight: Weight
    t: tuple
    tau: float
    pair: tuple
    resolution: int = 33

    def __post_init__(self):
        if self.F.nvars < 2:
            raise ValueError("need at least two variables")
        if len(self.t) != self.F.nvars:
            raise ValueError("t has wrong dimension")
        if self.weight.ndim != self.F.nvars:
            raise ValueError("weight dimension mismatch")
        i, j = self.pair
        if i == j or not (1 <= i <= self.F.nvars and 1 <= j <= self.F.nvars):
            raise ValueError("bad axis pair")

    def v_axes(self) -> tuple:
        i, j = self.pair
        return tuple(k for k in range(1, self.F.nvars + 1) if k not in (i, j))


def _axis_rate(F: MultiPoly, support: AxisBox, axis: int, tau: float,
               t_abs: float) -> float:
    """Sup of the integrand's phase derivative along one axis."""
    sup_dF = poly_abs_bound(F.derive(axis), support)
    lo = float(support.lo()[axis - 1])
    return TWO_PI * abs(tau) * sup_dF + (t_abs / lo if t_abs else 0.0)


def _odd(n: int) -> int:
    return n if n % 2 == 1 else n + 1


def _nyquist_points(width: float, rate: float, floor_pts: int) -> int:
    cycles = width * rate / TWO_PI
    return _odd(max(floor_pts, int(math.ceil(1.3 * cycles)) + 64))


class _Panel2D:
    __slots__ = ("lo1", "hi1", "lo2", "hi2")

    def __init__(self, lo1, hi1, lo2, hi2):
        self.lo1, self.hi1, self.lo2, self.hi2 = lo1, hi1, lo2, hi2


def _integrate_2d_osc(f2d: Callable, box: AxisBox, rate1: float, rate2: float,
                      tol: float, max_rounds: int = 24) -> tuple:
    """Adaptive 2D tensor-panel integration of a vectorized integrand.

    Panels start from a quarter-period pre-split per axis and carry an
    embedded 12/6-point tensor Gauss estimate; the flagged ones bisect
    along their wider-in-phase axis.  Returns (value, err, evals).
    """
    xi_h, w_h = _GL_HI
    xi_l, w_l = _GL_LO
    lo, hi = box.lo(), box.hi()
    spans = hi - lo
    area = float(spans[0] * spans[1])

    def n_panels(width, rate):
        per = max(2, int(math.ceil(width * rate / TWO_PI * 4.0)))
        return min(per, 4096)

    e1 = np.linspace(lo[0], hi[0], n_panels(spans[0], rate1) + 1)
    e2 = np.linspace(lo[1], hi[1], n_panels(spans[1], rate2) + 1)
    panels = [_Panel2D(a, b, c, d)
              for a, b in zip(e1[:-1], e1[1:])
              for c, d in zip(e2[:-1], e2[1:])]

    value = 0.0 + 0.0j
    err_acc = 0.0
    evals = 0
    for _ in range(max_rounds):
        B = len(panels)
        c1s = np.array([0.5 * (p.lo1 + p.hi1) for p in panels])
        h1s = np.array([0.5 * (p.hi1 - p.lo1) for p in panels])
        c2s = np.array([0.5 * (p.lo2 + p.hi2) for p in panels])
        h2s = np.array([0.5 * (p.hi2 - p.lo2) for p in panels])

        U1h = c1s[:, None, None] + h1s[:, None, None] * xi_h[None, :, None]
        U2h = c2s[:, None, None] + h2s[:, None, None] * xi_h[None, None, :]
        Fh = np.asarray(f2d(np.broadcast_to(U1h, (B, 12, 12)).ravel(),
                            np.broadcast_to(U2h, (B, 12, 12)).ravel())).reshape(B, 12, 12)
        hi_vals = np.einsum("bij,i,j->b", Fh, w_h, w_h) * h1s * h2s

        U1l = c1s[:, None, None] + h1s[:, None, None] * xi_l[None, :, None]
        U2l = c2s[:, None, None] + h2s[:, None, None] * xi_l[None, None, :]
        Fl = np.asarray(f2d(np.broadcast_to(U1l, (B, 6, 6)).ravel(),
                            np.broadcast_to(U2l, (B, 6, 6)).ravel())).reshape(B, 6, 6)
        lo_vals = np.einsum("bij,i,j->b", Fl, w_l, w_l) * h1s * h2s

        evals += B * (144 + 36)
        errs = np.abs(hi_vals - lo_vals)
        budgets = tol * (4.0 * h1s * h2s) / area
        ok = errs <= budgets
        value += complex(hi_vals[ok].sum())
        err_acc += float(errs[ok].sum())
        bad = np.nonzero(~ok)[0]
        if bad.size == 0:
            return value, err_acc, evals
        nxt = []
        scale1 = rate1 + 1.0 / spans[0]
        scale2 = rate2 + 1.0 / spans[1]
        for idx in bad:
            p = panels[idx]
            # split the axis with the larger phase-or-geometry extent
            if (p.hi1 - p.lo1) * scale1 >= (p.hi2 - p.lo2) * scale2:
                mid = 0.5 * (p.lo1 + p.hi1)
                nxt.extend([_Panel2D(p.lo1, mid, p.lo2, p.hi2),
                            _Panel2D(mid, p.hi1, p.lo2, p.hi2)])
            else:
                mid = 0.5 * (p.lo2 + p.hi2)
                nxt.extend([_Panel2D(p.lo1, p.hi1, p.lo2, mid),
                            _Panel2D(p.lo1, p.hi1, mid, p.hi2)])
        if len(nxt) > 200_000:
            raise QuadratureError("2d panel count exploded past 200000")
        panels = nxt
    raise QuadratureError("2d subdivision limit exceeded")


def integrate_phase(problem: PhaseProblem, tol: float = 1e-9) -> QuadResult:
    """Nested quadrature of the weighted oscillatory integral.

    Outer: trapezoid tensor grid over the frozen axes, inflated past the
    oscillation Nyquist count when the phase demands it, with a nested
    half-grid Richardson difference as the outer error term.  Inner:
    adaptive 2D panels over the working pair.
    """
    F, w, tau = problem.F, problem.weight, problem.tau
    i, j = problem.pair
    v_axes = problem.v_axes()
    support = w.support
    t = problem.t

    rate1 = _axis_rate(F, support, i, tau, abs(t[i - 1]))
    rate2 = _axis_rate(F, support, j, tau, abs(t[j - 1]))
    ubox = AxisBox(
        (support.center[i - 1], support.center[j - 1]),
        (support.radius[i - 1], support.radius[j - 1]),
    )

    # frozen-axis grids and trapezoid weights
    v_grids, v_weights = [], []
    for k in v_axes:
        n_k = _nyquist_points(2.0 * support.radius[k - 1],
                              _axis_rate(F, support, k, tau, abs(t[k - 1])),
                              problem.resolution)
        xs = np.linspace(support.lo()[k - 1], support.hi()[k - 1], n_k)
        ws = np.full(n_k, xs[1] - xs[0])
        ws[0] *= 0.5
        ws[-1] *= 0.5
        v_grids.append(xs)
        v_weights.append(ws)

    t_i, t_j = float(t[i - 1]), float(t[j - 1])
    log_needed_i = t_i != 0.0
    log_needed_j = t_j != 0.0
    inner_tol = tol if not v_axes else tol / max(
        1.0, float(np.prod([g.size for g in v_grids])) ** 0.5)

    def inner(v_values) -> tuple:
        coords = [None] * F.nvars
        wconst = 1.0
        for k, val in zip(v_axes, v_values):
            coords[k - 1] = float(val)
            wconst *= float(w.axis_factor_array(k - 1, np.asarray(val)))
        if wconst == 0.0:
            return (0.0 + 0.0j, 0.0, 0)

        def f2d(U1, U2):
            coords[i - 1] = U1
            coords[j - 1] = U2
            ph = TWO_PI * tau * F.eval_array(coords) if tau else 0.0
            if log_needed_i:
                ph = ph + t_i * np.log(U1)
            if log_needed_j:
                ph = ph + t_j * np.log(U2)
            amp = (w.axis_factor_array(i - 1, U1)
                   * w.axis_factor_array(j - 1, U2) * wconst)
            return amp * np.exp(1j * ph)

        return _integrate_2d_osc(f2d, ubox, rate1, rate2, inner_tol)

    if not v_axes:
        val, err, evals = inner(())
        return QuadResult(val, err, evals)

    # iterate the outer tensor grid in a fixed order
    shapes = [g.size for g in v_grids]
    inner_vals = np.zeros(shapes, dtype=complex)
    inner_errs = np.zeros(shapes, dtype=float)
    evals = 0
    for idx in np.ndindex(*shapes):
        vvals = [v_grids[d][idx[d]] for d in range(len(v_axes))]
        val, err, ev = inner(vvals)
        phase_v = 0.0
        for d, k in enumerate(v_axes):
            tk = float(t[k - 1])
            if tk:
                phase_v += tk * math.log(vvals[d])
        if phase_v:
            val *= complex(math.cos(phase_v), math.sin(phase_v))
        inner_vals[idx] = val
        inner_errs[idx] = err
        evals += ev

    full = _weighted_sum(inner_vals, v_weights)
    half_grids = [g[::2] for g in v_grids]
    half_weights = []
    for xs in half_grids:
        ws = np.full(xs.size, xs[1] - xs[0]) if xs.size > 1 else np.array([1.0])
        if xs.size > 1:
            ws[0] *= 0.5
            ws[-1] *= 0.5
        half_weights.append(ws)
    half = _weighted_sum(inner_vals[tuple(slice(None, None, 2) for _ in shapes)],
                         half_weights)
    outer_err = abs(full - half)
    inner_err_total = float(_weighted_sum(inner_errs, v_weights).real)
    return QuadResult(full, outer_err + abs(inner_err_total), evals)


def _weighted_sum(vals: np.ndarray, weights: list) -> complex:
    total = vals
    for ws in weights:
        total = np.tensordot(ws, total, axes=([0], [0]))
    return complex(total)


# -- batched kernel integrals over a parameter grid -------------------------------


def batch_phase_integrals(
    F: MultiPoly,
    weight: Weight,
    tau: float,
    pair: tuple,
    t1_values: np.ndarray,
    t2_values: np.ndarray,
    t_frozen: Optional[dict] = None,
    tol: float = 1e-11,
    resolution: int = 33,
    max_refine: int = 3,
    workers: Optional[int] = None,
) -> tuple:
    """All integrals over a (t1, t2) grid at one tau, sharing the kernel.

    The heavy factor weight * exp(2 pi i tau F) does not depend on the
    oscillation exponents, so it is summed over the frozen axes once into
    a 2D kernel on a trapezoid grid sized past the oscillation Nyquist
    count, and every (t1, t2) cell is a pair of weighted contractions
    against the kernel.  Two staggered grid sizes give a per-cell error
    estimate; grids double until every cell meets ``tol`` or the
    refinement budget is spent.

    Returns (values, errors, flags, evaluations) with shapes
    (len(t1_values), len(t2_values)).
    """
    t_frozen = dict(t_frozen or {})
    i, j = pair
    n = F.nvars
    v_axes = tuple(k for k in range(1, n + 1) if k not in (i, j))
    support = weight.support
    t1_values = np.asarray(t1_values, dtype=float)
    t2_values = np.asarray(t2_values, dtype=float)
    if workers is None:
        workers = int(os.environ.get("OSCBENCH_WORKERS", "1"))

    t1_max = float(np.max(np.abs(t1_values))) if t1_values.size else 0.0
    t2_max = float(np.max(np.abs(t2_values))) if t2_values.size else 0.0

    # term table: float coefficient, u-exponents, frozen-axis exponents
    terms = [
        (float(c), e[i - 1], e[j - 1], tuple(e[k - 1] for k in v_axes))
        for e, c in F.terms.items()
    ]
    # kernels factor across the two working axes when no monomial mixes them
    separable = all(a == 0 or b == 0 for _, a, b, _ in terms)

    def sizes() -> dict:
        out = {}
        out[i] = _nyquist_points(2 * support.radius[i - 1],
                                 _axis_rate(F, support, i, tau, t1_max),
                                 65)
        out[j] = _nyquist_points(2 * support.radius[j - 1],
                                 _axis_rate(F, support, j, tau, t2_max),
                                 65)
        for k in v_axes:
            out[k] = _nyquist_points(2 * support.radius[k - 1],
                                     _axis_rate(F, support, k, tau,
                                                abs(t_frozen.get(k, 0.0))),
                                     resolution)
        return out

    def axis_grid(k: int, npts: int):
        xs = np.linspace(support.lo()[k - 1], support.hi()[k - 1], npts)
        ws = np.full(npts, xs[1] - xs[0])
        ws[0] *= 0.5
        ws[-1] *= 0.5
        return xs, ws

    def kernel_and_contract(size_map: dict) -> tuple:
        u1, w1 = axis_grid(i, size_map[i])
        u2, w2 = axis_grid(j, size_map[j])
        amp1 = weight.axis_factor_array(i - 1, u1) * w1
        amp2 = weight.axis_factor_array(j - 1, u2) * w2
        A1 = np.exp(1j * np.outer(t1_values, np.log(u1))) * amp1[None, :]
        A2 = np.exp(1j * np.outer(t2_values, np.log(u2))) * amp2[None, :]

        pow1 = {a: u1 ** a for _, a, _, _ in terms}
        pow2 = {b: u2 ** b for _, _, b, _ in terms}

        v_grids = []
        for k in v_axes:
            xs, ws = axis_grid(k, size_map[k])
            fac = weight.axis_factor_array(k - 1, xs) * ws
            tk = float(t_frozen.get(k, 0.0))
            if tk:
                fac = fac * np.exp(1j * tk * np.log(xs))
            v_grids.append((k, xs, fac))
        combos = list(np.ndindex(*[g[1].size for g in v_grids])) if v_grids else [()]
        evals = (u1.size + u2.size if separable else u1.size * u2.size) * len(combos)

        def node_coeffs(combo):
            """Per-node weight constant and per-term scalar coefficients."""
            cv = 1.0 + 0.0j
            vvals = []
            for (k, xs, fac), idx in zip(v_grids, combo):
                cv *= fac[idx]
                vvals.append(float(xs[idx]))
            coefs = []
            for c, a, b, ve in terms:
                g = c
                for vx, p in zip(vvals, ve):
                    if p:
                        g *= vx ** p
                coefs.append(g)
            return cv, coefs

        if separable:
            vals = np.zeros((t1_values.size, t2_values.size), dtype=complex)
            for combo in combos:
                cv, coefs = node_coeffs(combo)
                if cv == 0.0:
                    continue
                ph1 = np.zeros(u1.size)
                ph2 = np.zeros(u2.size)
                ph0 = 0.0
                for (c, a, b, _), g in zip(terms, coefs):
                    if a:
                        ph1 = ph1 + g * pow1[a]
                    elif b:
                        ph2 = ph2 + g * pow2[b]
                    else:
                        ph0 += g
                scale = cv * complex(math.cos(TWO_PI * tau * ph0),
                                     math.sin(TWO_PI * tau * ph0))
                e1 = np.exp(1j * TWO_PI * tau * ph1) if tau else np.ones(u1.size)
                e2 = np.exp(1j * TWO_PI * tau * ph2) if tau else np.ones(u2.size)
                vals += scale * np.outer(A1 @ e1, A2 @ e2)
            return vals, evals

        mono = {}
        for _, a, b, _ in terms:
            if (a, b) not in mono:
                mono[(a, b)] = pow1[a][:, None] * pow2[b][None, :]

        def node_kernel(combo) -> np.ndarray:
            cv, coefs = node_coeffs(combo)
            if cv == 0.0:
                return np.zeros((u1.size, u2.size), dtype=complex)
            ph = np.zeros((u1.size, u2.size))
            for (c, a, b, _), g in zip(terms, coefs):
                ph = ph + g * mono[(a, b)]
            if tau:
                return cv * np.exp(1j * TWO_PI * tau * ph)
            return np.full((u1.size, u2.size), cv)

        if workers > 1 and len(combos) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(node_kernel, combos))
            K = parts[0]
            for p in parts[1:]:
                K += p
        else:
            K = node_kernel(combos[0])
            for combo in combos[1:]:
                K += node_kernel(combo)
        return A1 @ K @ A2.T, evals

    base = sizes()
    check = {k: _odd(int(math.ceil(v * 1.37))) for k, v in base.items()}
    vals_a, ev_a = kernel_and_contract(base)
    vals_b, ev_b = kernel_and_contract(check)
    evals = ev_a + ev_b
    errs = np.abs(vals_a - vals_b)
    for _ in range(max_refine):
        if float(errs.max()) <= tol:
            break
        base = {k: _odd(2 * v) for k, v in check.items()}
        vals_a, vals_b = vals_b, None
        vals_b, ev = kernel_and_contract(base)
        evals += ev
        errs = np.abs(vals_a - vals_b)
        check = base
    flags = errs > tol
    return vals_b, errs, flags, evals

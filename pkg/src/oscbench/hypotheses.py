"""Case classification, pair search, surface points, and smooth weights.

Given a form F and a base point, this module certifies which of the two
working hypotheses holds on an axis box (nonvanishing of the scaled
Jacobian determinant form, of the two diagonal factors, and of the mixed
second derivative, the latter replaced by exact symbolic vanishing in the
second case), searches for a variable pair whose determinant form is not
a multiple of F, locates non-singular points of the zero set, and builds
the compactly supported product-bump weight.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bounds import AxisBox, certified_max_abs, certified_min_abs
from .errors import CertificationError, SingularSurfacePointError
from .polyring import (
    MultiPoly,
    diagonal_factor,
    divides,
    parse_poly,
    scaled_gradient_det,
)

CASE_I = "CaseI"
CASE_II = "CaseII"
NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class CaseReport:
    """Certified classification of (F, pair, box) with its box constants.

    ``m0`` bounds the determinant form from below in absolute value on the
    box, ``m1`` the smaller of the two diagonal factors, ``m2`` the mixed
    second derivative (first case) or the second diagonal factor (second
    case, where the mixed derivative vanishes identically).  ``lam`` holds
    certified upper-bound witnesses for twice the scaled first and second
    radial derivative sums.
    """

    case_label: str
    pair: tuple
    m0: float
    m1: float
    m2: float
    lam: tuple
    box: AxisBox
    rho_min: float
    rho_max: float
    diag_bounds: tuple = (0.0, 0.0)
    reason: Optional[str] = None

    def summary(self) -> str:
        lines = [
            f"case: {self.case_label}",
            f"pair: {self.pair}",
            f"m0: {self.m0:.17g}",
            f"m1: {self.m1:.17g}",
            f"m2: {self.m2:.17g}",
            f"lambda1: {self.lam[0]:.17g}",
            f"lambda2: {self.lam[1]:.17g}",
            f"rho_min: {self.rho_min:.17g}",
            f"rho_max: {self.rho_max:.17g}",
        ]
        if self.reason:
            lines.append(f"reason: {self.reason}")
        return "\n".join(lines)


def _not_applicable(pair, box, rho_min, rho_max, reason) -> CaseReport:
    return CaseReport(
        case_label=NOT_APPLICABLE,
        pair=pair,
        m0=0.0,
        m1=0.0,
        m2=0.0,
        lam=(0.0, 0.0),
        box=box,
        rho_min=rho_min,
        rho_max=rho_max,
        reason=reason,
    )


def classify_case(
    F: MultiPoly,
    i: int,
    j: int,
    x0: Sequence[float],
    delta: float,
    grid_n: int = 33,
) -> CaseReport:
    """Classify (F, i, j, x0, delta) with certified box constants.

    Nonvanishing is certified by dense grid evaluation plus a Lipschitz
    pad from coefficient-norm gradient bounds; certification failure
    returns a NotApplicable report naming the first failing condition.
    The lambda witnesses are computed over the same box, which contains
    every smaller working box used downstream, so they remain valid upper
    bounds there.
    """
    if i == j:
        raise ValueError("pair indices must differ")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if len(x0) != F.nvars:
        raise ValueError("base point has wrong dimension")
    box = AxisBox.cube(x0, delta)
    if not box.inside_unit_cube():
        raise ValueError("box leaves the open unit cube")
    rho_min = float(box.lo().min())
    rho_max = float(box.hi().max())
    pair = (i, j)

    det_form = scaled_gradient_det(F, i, j)
    if det_form.is_zero():
        return _not_applicable(pair, box, rho_min, rho_max,
                               "determinant form identically zero")
    mixed = F.derive(i).derive(j)

    b0 = certified_min_abs(det_form, box, grid_n)
    if b0.bound <= 0:
        return _not_applicable(pair, box, rho_min, rho_max,
                               "determinant form not certified nonvanishing")
    diag_lo = []
    for k in pair:
        bk = certified_min_abs(diagonal_factor(F, k), box, grid_n)
        if bk.bound <= 0:
            return _not_applicable(
                pair, box, rho_min, rho_max,
                f"diagonal factor for x{k} not certified nonvanishing")
        diag_lo.append(bk.bound)

    if mixed.is_zero():
        label = CASE_II
        m2 = diag_lo[1]
    else:
        label = CASE_I
        b2 = certified_min_abs(mixed, box, grid_n)
        if b2.bound <= 0:
            return _not_applicable(
                pair, box, rho_min, rho_max,
                "mixed second derivative not certified nonvanishing")
        m2 = b2.bound

    lam = []
    for k in pair:
        xk = MultiPoly.variable(k, F.nvars)
        fk = F.derive(k)
        sup_second = certified_max_abs(xk * xk * fk.derive(k), box, grid_n).bound
        sup_first = certified_max_abs(xk * fk, box, grid_n).bound
        lam.append(2.0 * (sup_second + sup_first))

    return CaseReport(
        case_label=label,
        pair=pair,
        m0=b0.bound,
        m1=min(diag_lo),
        m2=m2,
        lam=tuple(lam),
        box=box,
        rho_min=rho_min,
        rho_max=rho_max,
        diag_bounds=tuple(diag_lo),
    )


def find_good_pair(F: MultiPoly) -> Optional[tuple]:
    """First pair (i, j), lexicographic, whose determinant form is nonzero
    and not a polynomial multiple of F; None when no pair qualifies."""
    if not F.is_homogeneous() or F.degree() <= 1:
        raise ValueError("form must be homogeneous of degree > 1")
    for i in range(1, F.nvars + 1):
        for j in range(i + 1, F.nvars + 1):
            g = scaled_gradient_det(F, i, j)
            if g.is_zero():
                continue
            if divides(F, g) is None:
                return (i, j)
    return None


@dataclass(frozen=True)
class PairEvidence:
    """Constructive diagnostics accompanying a pair search result."""

    pair: tuple
    det_form: MultiPoly
    mixed_vanishes: bool
    valuations: tuple  # min power of x_i dividing each diagonal factor
    split_sizes: tuple  # term counts of the four-way monomial split


def pair_evidence(F: MultiPoly, i: int, j: int) -> PairEvidence:
    from .polyring import split_monomials, valuation

    det_form = scaled_gradient_det(F, i, j)
    mixed = F.derive(i).derive(j)
    vals = []
    for k in (i, j):
        dk = diagonal_factor(F, k)
        vals.append(valuation(dk, i) if not dk.is_zero() else -1)
    sp = split_monomials(F, i, j)
    sizes = tuple(len(p.terms) for p in (sp.f1, sp.g, sp.f2, sp.f0))
    return PairEvidence((i, j), det_form, mixed.is_zero(), tuple(vals), sizes)


def find_surface_point(
    F: MultiPoly,
    transversal: int,
    fixed_coords: Sequence[float],
    scan_points: int = 2049,
) -> Optional[np.ndarray]:
    """Bisection along one axis for a non-singular zero of F in (0,1)^n.

    ``fixed_coords`` gives the values of the other coordinates in
    ascending axis order.  Returns the located point (residual below
    1e-12), None when F has no sign change along the scan, and raises
    SingularSurfacePointError when the root has gradient norm <= 1e-8.
    """
    n = F.nvars
    if not 1 <= transversal <= n:
        raise ValueError("transversal axis out of range")
    if len(fixed_coords) != n - 1:
        raise ValueError("need one fixed coordinate per remaining axis")
    if any(not 0.0 < c < 1.0 for c in fixed_coords):
        raise ValueError("fixed coordinates must lie in (0,1)")

    def assemble(s: float) -> np.ndarray:
        x = np.empty(n)
        others = [k for k in range(n) if k != transversal - 1]
        for k, c in zip(others, fixed_coords):
            x[k] = c
        x[transversal - 1] = s
        return x

    fval = F.compile_float()
    eps = 1e-9
    ss = np.linspace(eps, 1.0 - eps, scan_points)
    gs = np.array([fval(assemble(s)) for s in ss])
    idx = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)[0]
    exact = np.nonzero(gs == 0.0)[0]
    if exact.size:
        root = float(ss[exact[0]])
    elif idx.size:
        a, b = float(ss[idx[0]]), float(ss[idx[0] + 1])
        fa = fval(assemble(a))
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = fval(assemble(mid))
            if fm == 0.0 or (b - a) < 1e-17:
                a = b = mid
                break
            if (fa < 0) == (fm < 0):
                a, fa = mid, fm
            else:
                b = mid
        root = 0.5 * (a + b)
    else:
        return None

    x0 = assemble(root)
    grad = np.array([F.derive(k).eval([float(v) for v in x0]) for k in range(1, n + 1)],
                    dtype=float)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= 1e-8:
        raise SingularSurfacePointError(
            f"zero at {x0.tolist()} has gradient norm {gnorm:.3e}")
    if abs(fval(x0)) >= 1e-12:
        raise CertificationError("bisection failed to reach residual 1e-12")
    return x0


# -- smooth weight -----------------------------------------------------------


def bump(s):
    """The mollifier exp(1 - 1/(1 - s^2)) on |s| < 1, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out if out.ndim else float(out)


def bump_d1(s):
    """First derivative of the mollifier."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si * si
    out[inside] = np.exp(1.0 - 1.0 / w) * (-2.0 * si / w**2)
    return out if out.ndim else float(out)


def bump_d2(s):
    """Second derivative of the mollifier."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si * si
    out[inside] = np.exp(1.0 - 1.0 / w) * (
        4.0 * si * si / w**4 - 2.0 / w**2 - 8.0 * si * si / w**3
    )
    return out if out.ndim else float(out)


class Weight:
    """Product bump weight centered at x0 with half-width delta0.

    Each axis factor is b((x_j - c_j)/delta0) times an optional monomial
    power x_j^{r_j} (the exponent shift absorbed into the weight).  The
    weight vanishes identically outside the closed support box, and the
    measured cap bounds sup|w| + max_j sup|dw| + max_{j<=k} sup|d2w|.
    """

    def __init__(self, center: Sequence[float], delta0: float,
                 r: Optional[Sequence[float]] = None, cap_grid: int = 4097):
        center = tuple(float(c) for c in center)
        if delta0 <= 0:
            raise ValueError("delta0 must be positive")
        support = AxisBox.cube(center, delta0)
        if not support.inside_unit_cube():
            raise ValueError("weight support leaves the open unit cube")
        self.center = center
        self.delta0 = float(delta0)
        self.r = None if r is None else tuple(float(v) for v in r)
        if self.r is not None and len(self.r) != len(center):
            raise ValueError("exponent shift has wrong dimension")
        self.support = support
        self.ndim = len(center)
        self.cap = self._measure_cap(cap_grid)

    # per-axis factor and its derivatives, vectorized over x
    def _factor(self, j: int, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        c, d = self.center[j], self.delta0
        s = (x - c) / d
        rj = 0.0 if self.r is None else self.r[j]
        b0 = bump(s)
        if order == 0:
            base = b0
            return base * x**rj if rj else base
        b1 = bump_d1(s) / d
        if order == 1:
            if not rj:
                return b1
            return b1 * x**rj + b0 * rj * x ** (rj - 1.0)
        b2 = bump_d2(s) / d**2
        if order == 2:
            if not rj:
                return b2
            return (b2 * x**rj + 2.0 * b1 * rj * x ** (rj - 1.0)
                    + b0 * rj * (rj - 1.0) * x ** (rj - 2.0))
        raise ValueError("order must be 0, 1 or 2")

    def eval(self, x: Sequence[float]) -> float:
        out = 1.0
        for j, xj in enumerate(x):
            out *= float(self._factor(j, xj))
            if out == 0.0:
                return 0.0
        return out

    def eval_array(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Product over broadcastable per-axis coordinate arrays."""
        out = None
        for j, xj in enumerate(axes):
            f = self._factor(j, xj)
            out = f if out is None else out * f
        return out

    def partial(self, j: int, x: Sequence[float]) -> float:
        out = 1.0
        for k, xk in enumerate(x):
            out *= float(self._factor(k, xk, order=1 if k == j else 0))
        return out

    def second(self, j: int, k: int, x: Sequence[float]) -> float:
        out = 1.0
        for a, xa in enumerate(x):
            order = (1 if a in (j, k) else 0) if j != k else (2 if a == j else 0)
            out *= float(self._factor(a, xa, order=order))
        return out

    def axis_factor_array(self, j: int, xs: np.ndarray) -> np.ndarray:
        return self._factor(j, xs)

    def integral_1d(self, j: int, n: int = 20001) -> float:
        """Accurate trapezoid value of the j-th axis factor integral."""
        lo, hi = self.support.lo()[j], self.support.hi()[j]
        xs = np.linspace(lo, hi, n)
        return float(np.trapezoid(self._factor(j, xs), xs))

    def integral(self) -> float:
        out = 1.0
        for j in range(self.ndim):
            out *= self.integral_1d(j)
        return out

    def _measure_cap(self, n: int) -> float:
        sup0, sup1, sup2 = [], [], []
        for j in range(self.ndim):
            lo, hi = self.support.lo()[j], self.support.hi()[j]
            xs = np.linspace(lo, hi, n)
            sup0.append(float(np.max(np.abs(self._factor(j, xs)))))
            sup1.append(float(np.max(np.abs(self._factor(j, xs, 1)))))
            sup2.append(float(np.max(np.abs(self._factor(j, xs, 2)))))
        total = float(np.prod(sup0))
        best1 = 0.0
        for j in range(self.ndim):
            v = sup1[j] * np.prod([sup0[k] for k in range(self.ndim) if k != j])
            best1 = max(best1, float(v))
        best2 = 0.0
        for j in range(self.ndim):
            for k in range(j, self.ndim):
                if j == k:
                    v = sup2[j] * np.prod(
                        [sup0[a] for a in range(self.ndim) if a != j])
                else:
                    v = sup1[j] * sup1[k] * np.prod(
                        [sup0[a] for a in range(self.ndim) if a not in (j, k)])
                best2 = max(best2, float(v))
        return 1.01 * (total + best1 + best2)


def build_weight(x0: Sequence[float], delta0: float,
                 r: Optional[Sequence[float]] = None) -> Weight:
    """Construct the product bump weight; see :class:`Weight`."""
    return Weight(x0, delta0, r=r)


# -- declared singular-locus dimension heuristic ------------------------------


def hessian_rank_heuristic(F: MultiPoly, rng: np.random.Generator,
                           samples: int = 100) -> int:
    """Max rank of the Hessian of F over random points in (0.1, 0.9)^n.

    Used only to sanity-check a user-declared singular-locus dimension as
    n minus this rank; the check is heuristic and can disagree with the
    true dimension for cones whose singular locus is positive-dimensional.
    """
    n = F.nvars
    hess = [[F.derive(a + 1).derive(b + 1).compile_float() for b in range(n)]
            for a in range(n)]
    best = 0
    for _ in range(samples):
        x = rng.uniform(0.1, 0.9, size=n)
        H = np.array([[hess[a][b](x) for b in range(n)] for a in range(n)])
        best = max(best, int(np.linalg.matrix_rank(H, tol=1e-9)))
        if best == n:
            break
    return best


def check_declared_dim(F: MultiPoly, declared: int,
                       rng: np.random.Generator) -> Optional[str]:
    """Warning text when the declared dimension disagrees with the heuristic."""
    guess = F.nvars - hessian_rank_heuristic(F, rng)
    if guess != declared:
        return (f"declared singular-locus dimension {declared} disagrees with "
                f"the Hessian-rank heuristic value {guess} (heuristic only)")
    return None


# -- problem configuration -----------------------------------------------------


@dataclass
class ProblemConfig:
    """Problem description read from a JSON config file."""

    name: str
    polynomial: str
    dim_v_star: int
    delta: float
    delta0: float
    nvars: Optional[int] = None
    pair: Optional[tuple] = None
    x0: Optional[tuple] = None
    surface_search: Optional[dict] = None
    r: Optional[tuple] = None
    grid: int = 33
    seed: int = 0

    def form(self) -> MultiPoly:
        return parse_poly(self.polynomial, nvars=self.nvars)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "polynomial": self.polynomial,
            "dim_v_star": self.dim_v_star,
            "delta": self.delta,
            "delta0": self.delta0,
            "grid": self.grid,
            "seed": self.seed,
        }
        if self.nvars is not None:
            out["nvars"] = self.nvars
        if self.pair is not None:
            out["pair"] = list(self.pair)
        if self.x0 is not None:
            out["x0"] = list(self.x0)
        if self.surface_search is not None:
            out["surface_search"] = self.surface_search
        if self.r is not None:
            out["r"] = list(self.r)
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path) -> ProblemConfig:
    data = json.loads(Path(path).read_text())
    known = {
        "name", "polynomial", "dim_v_star", "delta", "delta0", "nvars",
        "pair", "x0", "surface_search", "r", "grid", "seed",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("name", "polynomial", "dim_v_star", "delta", "delta0"):
        if key not in data:
            raise ValueError(f"config is missing required key {key!r}")
    cfg = ProblemConfig(
        name=data["name"],
        polynomial=data["polynomial"],
        dim_v_star=int(data["dim_v_star"]),
        delta=float(data["delta"]),
        delta0=float(data["delta0"]),
        nvars=data.get("nvars"),
        pair=tuple(data["pair"]) if "pair" in data else None,
        x0=tuple(data["x0"]) if "x0" in data else None,
        surface_search=data.get("surface_search"),
        r=tuple(data["r"]) if "r" in data else None,
        grid=int(data.get("grid", 33)),
        seed=int(data.get("seed", 0)),
    )
    return cfg


def resolve_base_point(cfg: ProblemConfig) -> np.ndarray:
    """The base point from the config, or located by bisection search."""
    if cfg.x0 is not None:
        return np.asarray(cfg.x0, dtype=float)
    if not cfg.surface_search:
        raise ValueError("config needs either x0 or surface_search")
    F = cfg.form()
    x0 = find_surface_point(
        F,
        int(cfg.surface_search["transversal"]),
        [float(v) for v in cfg.surface_search["fixed"]],
    )
    if x0 is None:
        raise CertificationError("surface point search found no sign change")
    return x0

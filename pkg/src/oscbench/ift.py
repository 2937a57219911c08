"""Certified inverse function theorem machinery for smooth plane maps.

A certificate consists of a square box W around a base point on which the
Jacobian determinant is certified nonvanishing and every Jacobian entry
stays within M of its base value, where M is strictly below
|det A| / (n * n! * a_max^(n-1)) with n = 2.  The certificate carries the
certified boundary minimum m of ||F(x) - F(x0)||, the target ball radius
m/2 on which the inverse is globally defined, and the bi-Lipschitz
constant  n! a_max^(n-1) / (|det A| - n M n! a_max^(n-1)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds import AxisBox
from .errors import CertificationError


@dataclass
class SmoothMap2:
    """A smooth map R^2 -> R^2 given by evaluators.

    ``eval`` and ``jac`` take a length-2 point; ``hess``, when present,
    returns the (2,2,2) array of second partials d2F_i/dx_j dx_k and is
    used for sharper Lipschitz pads.  ``eval_batch``/``jac_batch`` accept
    an (N,2) array of points and exist purely for speed.
    """

    eval: Callable
    jac: Callable
    hess: Optional[Callable] = None
    eval_batch: Optional[Callable] = None
    jac_batch: Optional[Callable] = None
    name: str = "map"

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        if self.eval_batch is not None:
            return np.asarray(self.eval_batch(pts), dtype=float)
        return np.array([self.eval(p) for p in pts], dtype=float)

    def jac_many(self, pts: np.ndarray) -> np.ndarray:
        if self.jac_batch is not None:
            return np.asarray(self.jac_batch(pts), dtype=float)
        return np.array([self.jac(p) for p in pts], dtype=float)


def linear_map(A: np.ndarray) -> SmoothMap2:
    A = np.asarray(A, dtype=float)

    def h(_):
        return np.zeros((2, 2, 2))

    return SmoothMap2(
        eval=lambda x: A @ np.asarray(x, dtype=float),
        jac=lambda x: A.copy(),
        hess=h,
        eval_batch=lambda pts: pts @ A.T,
        name="linear",
    )


def validate_jacobian(m: SmoothMap2, box: AxisBox, rng: np.random.Generator,
                      samples: int = 25, step: float = 1e-6,
                      rel_tol: float = 1e-6) -> float:
    """Worst relative disagreement between jac and central differences."""
    worst = 0.0
    lo, hi = box.lo(), box.hi()
    for _ in range(samples):
        x = rng.uniform(lo + step, hi - step)
        J = np.asarray(m.jac(x), dtype=float)
        fd = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            fd[:, k] = (np.asarray(m.eval(x + e)) - np.asarray(m.eval(x - e))) / (2 * step)
        scale = max(1.0, float(np.max(np.abs(J))))
        worst = max(worst, float(np.max(np.abs(J - fd))) / scale)
    if worst > rel_tol:
        raise CertificationError(
            f"jacobian disagrees with finite differences by {worst:.3e}")
    return worst


@dataclass(frozen=True)
class IFTCertificate:
    """Data certifying that a map is a diffeomorphism near a point."""

    x0: tuple
    A: tuple  # row-major 2x2 entries
    a_max: float
    M: float
    W: AxisBox
    m: float
    v_radius: float
    bilip: float
    det_lower: float
    jac_sup: float
    second_sup: float
    name: str = "map"

    @property
    def radius(self) -> float:
        return float(self.W.radius[0])

    def f_x0(self, m2: SmoothMap2) -> np.ndarray:
        return np.asarray(m2.eval(np.asarray(self.x0)), dtype=float)

    def to_text(self) -> str:
        a = self.A
        lines = [
            f"map: {self.name}",
            f"x0: {self.x0[0]:.17g} {self.x0[1]:.17g}",
            f"A: {a[0]:.17g} {a[1]:.17g} {a[2]:.17g} {a[3]:.17g}",
            f"a_max: {self.a_max:.17g}",
            f"M: {self.M:.17g}",
            f"radius: {self.radius:.17g}",
            f"m: {self.m:.17g}",
            f"v_radius: {self.v_radius:.17g}",
            f"bilip: {self.bilip:.17g}",
            f"det_lower: {self.det_lower:.17g}",
        ]
        return "\n".join(lines)


def admissible_m(A: np.ndarray) -> float:
    """Strict supremum of admissible M for a 2x2 base Jacobian."""
    A = np.asarray(A, dtype=float)
    det = float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    if det == 0.0:
        raise ValueError("base Jacobian is singular")
    a_max = float(np.max(np.abs(A)))
    return abs(det) / (2 * 2 * a_max)


def _second_derivative_sup(m2: SmoothMap2, box: AxisBox, grid_n: int,
                           fd_step: float = 1e-6) -> float:
    """Estimated sup of |d2F_i / dx_j dx_k| over the box, with 25% headroom."""
    pts = np.stack([g.ravel() for g in np.meshgrid(*box.grid(grid_n), indexing="ij")],
                   axis=-1)
    if m2.hess is not None:
        best = max(float(np.max(np.abs(np.asarray(m2.hess(p))))) for p in pts)
        return 1.25 * best
    best = 0.0
    for k in range(2):
        e = np.zeros(2)
        e[k] = fd_step
        jp = m2.jac_many(pts + e)
        jm = m2.jac_many(pts - e)
        best = max(best, float(np.max(np.abs(jp - jm))) / (2 * fd_step))
    return 1.25 * best


def _boundary_points(box: AxisBox, n_per_edge: int) -> np.ndarray:
    lo, hi = box.lo(), box.hi()
    ts = np.linspace(lo[0], hi[0], n_per_edge)
    ss = np.linspace(lo[1], hi[1], n_per_edge)
    edges = [
        np.stack([ts, np.full_like(ts, lo[1])], axis=-1),
        np.stack([ts, np.full_like(ts, hi[1])], axis=-1),
        np.stack([np.full_like(ss, lo[0]), ss], axis=-1),
        np.stack([np.full_like(ss, hi[0]), ss], axis=-1),
    ]
    return np.concatenate(edges, axis=0)


def certify(m2: SmoothMap2, x0: Sequence[float], seed_radius: float,
            grid_n: int = 33, boundary_n: int = 1024,
            m_fraction: float = 0.5, min_radius: float = 1e-10) -> IFTCertificate:
    """Shrink a square box around x0 until the certificate conditions hold.

    The radius halves from ``seed_radius`` until both the determinant
    nonvanishing and the Jacobian-variation conditions certify on a dense
    grid with a Lipschitz pad from the second-derivative sup; the boundary
    minimum is then a dense boundary sampling minus a sampling slack.
    """
    x0 = np.asarray(x0, dtype=float)
    A = np.asarray(m2.jac(x0), dtype=float)
    detA = float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    if detA == 0.0:
        raise CertificationError("Jacobian at the base point is singular")
    a_max = float(np.max(np.abs(A)))
    M = m_fraction * admissible_m(A)

    radius = float(seed_radius)
    while radius >= min_radius:
        box = AxisBox.cube(x0, radius)
        c2 = _second_derivative_sup(m2, box, grid_n=max(9, grid_n // 2))
        h = 2.0 * radius / (grid_n - 1)
        pad_jac = c2 * h  # two axes, half spacing each

        pts = np.stack(
            [g.ravel() for g in np.meshgrid(*box.grid(grid_n), indexing="ij")],
            axis=-1)
        jacs = m2.jac_many(pts)  # (N,2,2)
        dev = float(np.max(np.abs(jacs - A)))
        if dev + pad_jac >= M:
            radius *= 0.5
            continue

        jac_sup = float(np.max(np.abs(jacs))) + pad_jac
        dets = jacs[:, 0, 0] * jacs[:, 1, 1] - jacs[:, 0, 1] * jacs[:, 1, 0]
        pad_det = 4.0 * jac_sup * c2 * h
        det_lower = float(np.min(np.abs(dets))) - pad_det
        if det_lower <= 0.0:
            radius *= 0.5
            continue

        bpts = _boundary_points(box, boundary_n)
        fvals = m2.eval_many(bpts)
        f0 = np.asarray(m2.eval(x0), dtype=float)
        dist = np.linalg.norm(fvals - f0, axis=1)
        step = 2.0 * radius / (boundary_n - 1)
        slack = 2.0 * jac_sup * step
        m = float(dist.min()) - slack
        if m <= 0.0:
            raise CertificationError(
                "boundary minimum not certifiable (sampled minimum below slack)")

        denom = abs(detA) - 4.0 * M * a_max
        return IFTCertificate(
            x0=tuple(float(v) for v in x0),
            A=tuple(float(v) for v in A.ravel()),
            a_max=a_max,
            M=float(M),
            W=box,
            m=m,
            v_radius=m / 2.0,
            bilip=2.0 * a_max / denom,
            det_lower=det_lower,
            jac_sup=jac_sup,
            second_sup=c2,
            name=m2.name,
        )
    raise CertificationError(
        f"radius underflow below {min_radius:g} before certification")


def invert(cert: IFTCertificate, m2: SmoothMap2, y: Sequence[float],
           tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Newton inversion from the certificate base point.

    The target must lie in the certified ball; iterates leaving the
    certified box signal a certificate violation rather than a user error.
    """
    y = np.asarray(y, dtype=float)
    x0 = np.asarray(cert.x0, dtype=float)
    f0 = np.asarray(m2.eval(x0), dtype=float)
    if float(np.linalg.norm(y - f0)) >= cert.v_radius:
        raise ValueError("target lies outside the certified ball")
    x = x0.copy()
    for _ in range(max_iter):
        r = np.asarray(m2.eval(x), dtype=float) - y
        if float(np.linalg.norm(r)) < tol:
            return x
        J = np.asarray(m2.jac(x), dtype=float)
        x = x - np.linalg.solve(J, r)
        if not cert.W.contains(x, tol=1e-14):
            raise CertificationError(
                "Newton iterate left the certified box (certificate violation)")
    raise CertificationError("Newton did not reach the residual tolerance")

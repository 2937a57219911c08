"""Stationary-phase constructions: scaled gradient maps, critical points,
the quadratic-coefficient decomposition of the recentered phase, Morse
normal-form coordinates, and the branch trichotomy for the log-weighted
phase G(u) + A1 log u1 + A2 log u2.

Everything is organized around a bivariate slice of the form: the two
working axes become (u1, u2) and the remaining coordinates are fixed
exactly.  The recentered phase at a critical point z0 decomposes as

    phi(u) = sum_{i,j} u_i u_j phi_ij(u)

with phi_ij built from exact Taylor blocks of the second derivatives of G
plus a truncated logarithmic tail series for the diagonal entries.  The
Morse map turns phi into an exact sum of signed squares on a certified
box, with radii produced by the inverse-function-theorem certifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .bounds import AxisBox, certified_max_abs, certified_min_abs, poly_abs_bound
from .errors import CertificationError
from .hypotheses import CASE_I, CASE_II, CaseReport
from .ift import IFTCertificate, SmoothMap2, certify, invert
from .polyring import MultiPoly

TAIL_TOL = 1e-16


def _embed(p: MultiPoly, positions: Sequence[int], nvars: int) -> MultiPoly:
    """Re-embed a polynomial into ``nvars`` variables at 1-based positions."""
    terms = {}
    for e, c in p.terms.items():
        ne = [0] * nvars
        for a, k in zip(e, positions):
            ne[k - 1] = a
        terms[tuple(ne)] = c
    return MultiPoly(terms, nvars)


class PhaseSlice:
    """The form restricted to a coordinate pair, with exact substitution.

    ``pair`` are the 1-based original axes mapped to (u1, u2); ``v`` holds
    the values of the remaining coordinates in ascending axis order.  The
    parameters A = (A1, A2) are the logarithm weights of the phase.
    """

    def __init__(self, F: MultiPoly, pair: Sequence[int], v: Sequence[float],
                 A: Sequence[float] = (0.0, 0.0)):
        i, j = pair
        if i == j:
            raise ValueError("pair indices must differ")
        self.F = F
        self.pair = (i, j)
        self.v_axes = tuple(k for k in range(1, F.nvars + 1) if k not in (i, j))
        if len(v) != len(self.v_axes):
            raise ValueError("wrong number of fixed coordinates")
        self.v = tuple(float(x) for x in v)
        self.A = (float(A[0]), float(A[1]))
        subs = {k: Fraction(x) for k, x in zip(self.v_axes, self.v)}
        self.G = F.restrict([i, j], subs)
        self.G1 = self.G.derive(1)
        self.G2 = self.G.derive(2)
        self.G11 = self.G1.derive(1)
        self.G12 = self.G1.derive(2)
        self.G22 = self.G2.derive(2)
        u1 = MultiPoly.variable(1, 2)
        u2 = MultiPoly.variable(2, 2)
        self.P1 = u1 * self.G1
        self.P2 = u2 * self.G2
        self._p1f = self.P1.compile_float()
        self._p2f = self.P2.compile_float()
        self._jac_polys = [[self.P1.derive(1), self.P1.derive(2)],
                           [self.P2.derive(1), self.P2.derive(2)]]
        self._jacf = [[q.compile_float() for q in row] for row in self._jac_polys]

    def with_A(self, A: Sequence[float]) -> "PhaseSlice":
        out = object.__new__(PhaseSlice)
        out.__dict__ = dict(self.__dict__)
        out.A = (float(A[0]), float(A[1]))
        return out

    def scaled_gradient(self, u: Sequence[float]) -> np.ndarray:
        """The pair (u1 dG/du1, u2 dG/du2) at u."""
        u = [float(u[0]), float(u[1])]
        return np.array([self._p1f(u), self._p2f(u)])

    def scaled_gradient_jac(self, u: Sequence[float]) -> np.ndarray:
        u = [float(u[0]), float(u[1])]
        return np.array([[f(u) for f in row] for row in self._jacf])

    def psi_map(self) -> SmoothMap2:
        """The scaled gradient as a certified-map candidate."""
        hess_polys = [[[q.derive(k) for k in (1, 2)] for q in row]
                      for row in self._jac_polys]
        hess_f = [[[q.compile_float() for q in r2] for r2 in row]
                  for row in hess_polys]

        def hess(x):
            x = [float(x[0]), float(x[1])]
            return np.array([[[hess_f[i][j][k](x) for k in range(2)]
                              for j in range(2)] for i in range(2)])

        def eval_batch(pts):
            pts = np.asarray(pts, dtype=float)
            axes = [pts[..., 0], pts[..., 1]]
            return np.stack([self.P1.eval_array(axes), self.P2.eval_array(axes)],
                            axis=-1)

        def jac_batch(pts):
            pts = np.asarray(pts, dtype=float)
            axes = [pts[..., 0], pts[..., 1]]
            rows = [[self._jac_polys[i][j].eval_array(axes) for j in range(2)]
                    for i in range(2)]
            out = np.empty(pts.shape[:-1] + (2, 2))
            for i in range(2):
                for j in range(2):
                    out[..., i, j] = rows[i][j]
            return out

        return SmoothMap2(
            eval=self.scaled_gradient,
            jac=self.scaled_gradient_jac,
            hess=hess,
            eval_batch=eval_batch,
            jac_batch=jac_batch,
            name="scaled-gradient",
        )

    def phase_value(self, u: Sequence[float], tau: float) -> complex:
        """exp(2 pi i tau (G + A1 log u1 + A2 log u2)) at a point."""
        g = float(self.G.eval([float(u[0]), float(u[1])]))
        val = g + self.A[0] * math.log(u[0]) + self.A[1] * math.log(u[1])
        return complex(math.cos(2 * math.pi * tau * val),
                       math.sin(2 * math.pi * tau * val))


# -- critical points -----------------------------------------------------------


@dataclass(frozen=True)
class CriticalSearch:
    """Result of a critical point search inside a box."""

    point: Optional[np.ndarray]
    residual: float
    witness_axis: Optional[int] = None  # 1-based u-axis with certified bound
    witness_bound: float = 0.0


def _newton_critical(slice_: PhaseSlice, start: np.ndarray, box: AxisBox,
                     tol: float = 1e-12, max_iter: int = 60) -> Optional[np.ndarray]:
    target = -np.asarray(slice_.A)
    x = np.asarray(start, dtype=float).copy()
    for _ in range(max_iter):
        r = slice_.scaled_gradient(x) - target
        if float(np.linalg.norm(r)) < tol:
            return x
        J = slice_.scaled_gradient_jac(x)
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            return None
        x = x - step
        if float(np.max(np.abs(x - np.asarray(box.center)))) > 4.0 * max(box.radius):
            return None
    return None


def find_critical_point(slice_: PhaseSlice, search_box: AxisBox,
                        multi_start: int = 1, grid_n: int = 17) -> CriticalSearch:
    """Newton solve of (u1 dG/du1, u2 dG/du2) = (-A1, -A2) inside a box.

    Returns the point with residual below 1e-12 when it lies in the box.
    Otherwise returns a witness: the u-axis whose equation is certifiably
    bounded away from zero on the box, with the bound already divided by
    the largest coordinate (so it bounds |dG/du_j + A_j/u_j| from below).
    """
    starts = [np.asarray(search_box.center, dtype=float)]
    if multi_start > 1:
        side = int(round(math.sqrt(multi_start)))
        for a in np.linspace(-0.7, 0.7, side):
            for b in np.linspace(-0.7, 0.7, side):
                starts.append(np.asarray(search_box.center)
                              + np.array([a, b]) * np.asarray(search_box.radius))
    found = None
    for s in starts:
        x = _newton_critical(slice_, s, search_box)
        if x is not None and search_box.contains(x, tol=1e-13):
            if found is not None and np.linalg.norm(found - x) > 1e-9:
                raise CertificationError(
                    "two distinct critical points found in one box")
            found = x
    if found is not None:
        res = float(np.linalg.norm(slice_.scaled_gradient(found) + np.asarray(slice_.A)))
        return CriticalSearch(point=found, residual=res)

    # certified witness: min over the box of |P_j(u) + A_j|, scaled
    rho = float(search_box.hi().max())
    best_axis, best_bound = None, -np.inf
    for j, P in enumerate((slice_.P1, slice_.P2), start=1):
        cb = certified_min_abs(P + Fraction(slice_.A[j - 1]), search_box, grid_n)
        if cb.bound > best_bound:
            best_axis, best_bound = j, cb.bound
    return CriticalSearch(point=None, residual=math.inf,
                          witness_axis=best_axis,
                          witness_bound=max(best_bound, 0.0) / rho)


# -- phase decomposition ---------------------------------------------------------


def _log_tail_coeffs(z: float, radius: float, tol: float = TAIL_TOL) -> np.ndarray:
    """Coefficients of sum_{l>=2} (-1)^l u^{l-2} / (l z^l), truncated.

    Truncation index L is the first with geometric tail bound below tol,
    using the ratio radius/|z| (< 1/2 by the working-box precondition).
    """
    r = radius / abs(z)
    if r >= 0.5:
        raise CertificationError("log-series ratio >= 1/2 on the working box")
    coeffs = []
    ell = 2
    while True:
        coeffs.append(((-1.0) ** ell) / (ell * z**ell))
        # tail after this term: |t_{l+1}| / (1 - r), |t_l| <= r^{l-2}/(l z^2)
        tail = (r ** (ell - 1)) / ((ell + 1) * z * z * max(1.0 - r, 0.5)) if r > 0 else 0.0
        if tail < tol or ell > 200:
            break
        ell += 1
    return np.asarray(coeffs)


def _poly_eval_series(coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Horner evaluation of sum coeffs[k] * u^k (k from 0)."""
    out = np.zeros_like(np.asarray(u, dtype=float))
    for c in coeffs[::-1]:
        out = out * u + c
    return out


class _SeriesTail:
    """The diagonal logarithm tail S(u) and its derivative, vectorized."""

    def __init__(self, z: float, radius: float):
        self.z = float(z)
        self.radius = float(radius)
        self.c = _log_tail_coeffs(z, radius)
        ks = np.arange(1, len(self.c))
        self.dc = self.c[1:] * ks  # derivative coefficients

    def value(self, u):
        return _poly_eval_series(self.c, np.asarray(u, dtype=float))

    def deriv(self, u):
        if len(self.dc) == 0:
            return np.zeros_like(np.asarray(u, dtype=float))
        return _poly_eval_series(self.dc, np.asarray(u, dtype=float))

    def deriv_sup(self) -> float:
        """Sound sup of |S'| on |u| <= radius."""
        r = self.radius / abs(self.z)
        return 1.0 / (abs(self.z) ** 3 * (1.0 - r) ** 2)


class MorseChart:
    """Critical-point chart: quadratic-coefficient evaluators, signs, radii.

    Two-stage construction: the decomposition stage certifies delta4 and
    m4 and provides the phi_ij evaluators; the Morse stage certifies the
    normal-form map and fills delta5, delta6 and m5.  Charts are not
    mutated after the Morse stage completes.
    """

    def __init__(self, slice_: PhaseSlice, z0: Sequence[float], case_label: str,
                 delta1: float, working_radius: float):
        self.slice = slice_
        self.z0 = np.asarray(z0, dtype=float)
        self.case_label = case_label
        self.delta1 = float(delta1)
        self.working_radius = float(working_radius)
        self.eps1 = 0
        self.eps2 = 0
        self.delta4 = math.nan
        self.m4 = math.nan
        self.delta5 = math.nan
        self.delta6 = math.nan
        self.m5 = math.nan
        self.fmap: Optional[SmoothMap2] = None
        self.cert: Optional[IFTCertificate] = None
        self._build_coeffs()

    # quadratic coefficient construction
    def _build_coeffs(self):
        sl, z0 = self.slice, self.z0
        zf = [Fraction(float(z)) for z in z0]
        d = max(sl.G.degree(), 2)
        self._poly = {}
        self._dpoly = {}
        for (i, j, Gij) in ((1, 1, sl.G11), (1, 2, sl.G12), (2, 2, sl.G22)):
            shifted = Gij.shift(zf)
            acc = MultiPoly.constant(Fraction(1, 2) * shifted.eval([Fraction(0), Fraction(0)]), 2)
            for ell in range(1, max(d - 2, 0) + 1):
                part = shifted.homogeneous_part(ell)
                if not part.is_zero():
                    acc = acc + part * Fraction(1, (ell + 1) * (ell + 2))
            self._poly[(i, j)] = acc
            self._dpoly[(i, j)] = (acc.derive(1), acc.derive(2))
        self._tails = (
            _SeriesTail(float(z0[0]), self.working_radius),
            _SeriesTail(float(z0[1]), self.working_radius),
        )
        # centered phase, exact polynomial part
        Gs = sl.G.shift(zf)
        self._g_centered = Gs - MultiPoly.constant(Gs.eval([Fraction(0), Fraction(0)]), 2)

    def coeff(self, i: int, j: int, u1, u2):
        """phi_ij on arrays (broadcastable u1, u2)."""
        i, j = min(i, j), max(i, j)
        val = self._poly[(i, j)].eval_array([np.asarray(u1, float), np.asarray(u2, float)])
        if i == j:
            A = self.slice.A[i - 1]
            if A:
                uu = u1 if i == 1 else u2
                val = val - A * self._tails[i - 1].value(uu)
        return val

    def dcoeff(self, i: int, j: int, k: int, u1, u2):
        """d phi_ij / d u_k on arrays."""
        i, j = min(i, j), max(i, j)
        val = self._dpoly[(i, j)][k - 1].eval_array(
            [np.asarray(u1, float), np.asarray(u2, float)])
        if i == j and k == i:
            A = self.slice.A[i - 1]
            if A:
                uu = u1 if i == 1 else u2
                val = val - A * self._tails[i - 1].deriv(uu)
        return val

    def centered_phase(self, u1, u2):
        """Direct evaluator of the recentered phase phi."""
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        out = self._g_centered.eval_array([u1, u2])
        A1, A2 = self.slice.A
        z1, z2 = self.z0
        if A1:
            out = out + A1 * np.log1p(u1 / z1)
        if A2:
            out = out + A2 * np.log1p(u2 / z2)
        return out

    def decomposition_value(self, u1, u2):
        """sum_{i,j} u_i u_j phi_ij(u) over ordered pairs."""
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        return (u1 * u1 * self.coeff(1, 1, u1, u2)
                + 2.0 * u1 * u2 * self.coeff(1, 2, u1, u2)
                + u2 * u2 * self.coeff(2, 2, u1, u2))

    # m4 certification helpers
    def _coeff_pad(self, i: int, j: int, box: AxisBox, n: int) -> float:
        pad = 0.0
        for k in (1, 2):
            h = 2.0 * box.radius[k - 1] / (n - 1)
            bound = poly_abs_bound(self._dpoly[(i, j)][k - 1], box)
            if i == j and k == i:
                A = self.slice.A[i - 1]
                if A:
                    bound += abs(A) * self._tails[i - 1].deriv_sup()
            pad += bound * h / 2.0
        return pad

    def certify_m4(self, grid_n: int = 33, min_radius: float = 1e-10) -> None:
        """Halve delta4 until the quadratic coefficients certify nonvanishing."""
        ratio = self.working_radius / float(np.min(np.abs(self.z0)))
        if ratio >= 0.5:
            raise CertificationError("log-series ratio >= 1/2 on the working box")
        delta4 = 0.95 * self.working_radius
        while delta4 >= min_radius:
            box = AxisBox.cube((0.0, 0.0), delta4)
            g1, g2 = np.meshgrid(box.axis_grid(0, grid_n), box.axis_grid(1, grid_n),
                                 indexing="ij", sparse=True)
            p11 = self.coeff(1, 1, g1, g2)
            pad11 = self._coeff_pad(1, 1, box, grid_n)
            m11 = float(np.min(np.abs(p11))) - pad11
            candidates = [m11]
            if self.case_label == CASE_I:
                p12 = self.coeff(1, 2, g1, g2)
                p22 = self.coeff(2, 2, g1, g2)
                pad12 = self._coeff_pad(1, 2, box, grid_n)
                pad22 = self._coeff_pad(2, 2, box, grid_n)
                det = p11 * p22 - p12 * p12
                sup11 = float(np.max(np.abs(p11))) + pad11
                sup12 = float(np.max(np.abs(p12))) + pad12
                sup22 = float(np.max(np.abs(p22))) + pad22
                pad_det = sup11 * pad22 + sup22 * pad11 + 2.0 * sup12 * pad12
                mdet = float(np.min(np.abs(det))) - pad_det
                candidates.append(mdet)
                sign_second = det
            else:
                p22 = self.coeff(2, 2, g1, g2)
                pad22 = self._coeff_pad(2, 2, box, grid_n)
                m22 = float(np.min(np.abs(p22))) - pad22
                candidates.append(m22)
                sign_second = p22
            m4 = min(candidates)
            if m4 > 0.0:
                self.delta4 = delta4
                self.m4 = m4
                self.eps1 = 1 if float(p11.ravel()[0]) > 0 else -1
                self.eps2 = 1 if float(np.asarray(sign_second).ravel()[0]) > 0 else -1
                return
            delta4 *= 0.5
        raise CertificationError("delta4 underflow before m4 certification")

    # Morse normal-form map
    def morse_map(self) -> SmoothMap2:
        if not self.eps1:
            raise CertificationError("m4 certification must run before the Morse map")
        e1, e2 = float(self.eps1), float(self.eps2)
        case1 = self.case_label == CASE_I

        def pieces(u1, u2):
            p11 = self.coeff(1, 1, u1, u2)
            if case1:
                p12 = self.coeff(1, 2, u1, u2)
                p22 = self.coeff(2, 2, u1, u2)
                det = p11 * p22 - p12 * p12
                return p11, p12, p22, det
            p22 = self.coeff(2, 2, u1, u2)
            return p11, None, p22, None

        def eval_batch(pts):
            pts = np.asarray(pts, dtype=float)
            u1, u2 = pts[..., 0], pts[..., 1]
            p11, p12, p22, det = pieces(u1, u2)
            s1 = np.sqrt(e1 * p11)
            if case1:
                y1 = s1 * (u1 + (p12 / p11) * u2)
                y2 = u2 * np.sqrt(e1 * e2 * det / p11)
            else:
                y1 = u1 * s1
                y2 = u2 * np.sqrt(e2 * p22)
            return np.stack([y1, y2], axis=-1)

        def jac_batch(pts):
            pts = np.asarray(pts, dtype=float)
            u1, u2 = pts[..., 0], pts[..., 1]
            p11, p12, p22, det = pieces(u1, u2)
            d11 = [self.dcoeff(1, 1, k, u1, u2) for k in (1, 2)]
            out = np.empty(pts.shape[:-1] + (2, 2))
            if case1:
                d12 = [self.dcoeff(1, 2, k, u1, u2) for k in (1, 2)]
                d22 = [self.dcoeff(2, 2, k, u1, u2) for k in (1, 2)]
                s1 = np.sqrt(e1 * p11)
                q = p12 / p11
                R = e1 * e2 * det / p11
                sR = np.sqrt(R)
                lin = u1 + q * u2
                for k in (0, 1):
                    ds1 = e1 * d11[k] / (2.0 * s1)
                    dq = (d12[k] * p11 - p12 * d11[k]) / (p11 * p11)
                    ddet = d11[k] * p22 + p11 * d22[k] - 2.0 * p12 * d12[k]
                    dR = e1 * e2 * (ddet * p11 - det * d11[k]) / (p11 * p11)
                    dsR = dR / (2.0 * sR)
                    base = np.ones_like(u1) if k == 0 else q
                    out[..., 0, k] = ds1 * lin + s1 * (base + u2 * dq)
                    out[..., 1, k] = u2 * dsR + (sR if k == 1 else 0.0)
            else:
                d22 = [self.dcoeff(2, 2, k, u1, u2) for k in (1, 2)]
                s1 = np.sqrt(e1 * p11)
                s2 = np.sqrt(e2 * p22)
                out[..., 0, 0] = s1 + u1 * e1 * d11[0] / (2.0 * s1)
                out[..., 0, 1] = u1 * e1 * d11[1] / (2.0 * s1)
                out[..., 1, 0] = u2 * e2 * d22[0] / (2.0 * s2)
                out[..., 1, 1] = s2 + u2 * e2 * d22[1] / (2.0 * s2)
            return out

        fmap = SmoothMap2(
            eval=lambda x: eval_batch(np.asarray(x, dtype=float)[None, :])[0],
            jac=lambda x: jac_batch(np.asarray(x, dtype=float)[None, :])[0],
            eval_batch=eval_batch,
            jac_batch=jac_batch,
            name="morse-normal-form",
        )
        self.fmap = fmap
        return fmap

    def certify_morse(self, grid_n: int = 33) -> IFTCertificate:
        """Certify the normal-form map and fill delta5, delta6, m5."""
        fmap = self.morse_map()
        cert = certify(fmap, (0.0, 0.0), seed_radius=self.delta4, grid_n=grid_n)
        self.cert = cert
        self.delta5 = cert.radius
        self.m5 = cert.m

        delta6 = min(0.95 * self.delta5 / 4.0, 0.95 * self.delta1 / 3.0)
        while delta6 >= 1e-12:
            box = AxisBox.cube((0.0, 0.0), 4.0 * delta6)
            pts = np.stack([g.ravel() for g in
                            np.meshgrid(*box.grid(grid_n), indexing="ij")], axis=-1)
            vals = fmap.eval_many(pts)
            sup = float(np.max(np.linalg.norm(vals, axis=1)))
            h = 2.0 * box.radius[0] / (grid_n - 1)
            pad = 2.0 * cert.jac_sup * h * math.sqrt(2.0) / 2.0
            if sup + pad < 0.98 * self.m5 / 2.0:
                self.delta6 = delta6
                return cert
            delta6 *= 0.5
        raise CertificationError("delta6 underflow in Morse chart certification")

    def morse_identity_residual(self, u1, u2) -> np.ndarray:
        """|phi - signed sum of squares of the normal-form coordinates|."""
        if self.fmap is None:
            raise CertificationError("Morse map not built")
        pts = np.stack([np.asarray(u1, float).ravel(),
                        np.asarray(u2, float).ravel()], axis=-1)
        y = self.fmap.eval_many(pts)
        if self.case_label == CASE_I:
            model = self.eps1 * y[:, 0] ** 2 + self.eps1 * self.eps2 * y[:, 1] ** 2
        else:
            model = self.eps1 * y[:, 0] ** 2 + self.eps2 * y[:, 1] ** 2
        direct = self.centered_phase(np.asarray(u1, float).ravel(),
                                     np.asarray(u2, float).ravel())
        return np.abs(direct - model)

    def summary(self) -> str:
        lines = [
            f"case: {self.case_label}",
            f"z0: {self.z0[0]:.17g} {self.z0[1]:.17g}",
            f"A: {self.slice.A[0]:.17g} {self.slice.A[1]:.17g}",
            f"eps: {self.eps1} {self.eps2}",
            f"delta4: {self.delta4:.17g}",
            f"m4: {self.m4:.17g}",
            f"delta5: {self.delta5:.17g}",
            f"delta6: {self.delta6:.17g}",
            f"m5: {self.m5:.17g}",
        ]
        return "\n".join(lines)


def decompose_phase(slice_: PhaseSlice, z0: Sequence[float], delta1: float,
                    case_label: str, grid_n: int = 33) -> MorseChart:
    """Build a chart at a certified critical point and certify delta4/m4.

    The working radius is just under half of delta1, matching the box on
    which the chart is used; the log-series convergence ratio must stay
    below one half there.
    """
    z0 = np.asarray(z0, dtype=float)
    res = float(np.linalg.norm(slice_.scaled_gradient(z0) + np.asarray(slice_.A)))
    if res > 1e-10:
        raise CertificationError(
            f"z0 is not a critical point (residual {res:.3e})")
    chart = MorseChart(slice_, z0, case_label, delta1=delta1,
                       working_radius=0.95 * delta1 / 2.0)
    chart.certify_m4(grid_n=grid_n)
    return chart


# -- geometry pipeline and branch regions ----------------------------------------


@dataclass(frozen=True)
class BranchRegions:
    """Image-space windows and constants for the branch trichotomy."""

    eta0: float
    center: tuple  # scaled gradient image of u0 at the reference slice
    u0: tuple
    D1: AxisBox
    D2: AxisBox
    lam: tuple
    rho_min: float
    rho_max: float
    delta7: float
    b2_radius: float
    b3_radius: float


@dataclass(frozen=True)
class BranchDecision:
    kind: str  # LargeA | NoCritical | Critical
    axis: Optional[int] = None  # 1-based u-axis for the first two kinds
    c1: float = 0.0
    c2: float = 0.0
    z0: Optional[tuple] = None


LARGE_A = "LargeA"
NO_CRITICAL = "NoCritical"
CRITICAL = "Critical"


def classify_branch(slice_: PhaseSlice, regions: BranchRegions) -> BranchDecision:
    """Total trichotomy for the slice's (A1, A2).

    Large logarithm weights give a certified first-derivative bound
    lam_j/(2 rho_max) with second-derivative floor lam_j/(2 rho_max^2);
    otherwise either the target stays out of the doubled window (uniform
    lower bound eta0/rho_max with curvature cap from the lam witnesses) or
    a critical point exists in the chart box and Newton locates it.
    """
    A = slice_.A
    for j in (1, 2):
        if abs(A[j - 1]) > regions.lam[j - 1]:
            return BranchDecision(
                kind=LARGE_A, axis=j,
                c1=regions.lam[j - 1] / (2.0 * regions.rho_max),
                c2=regions.lam[j - 1] / (2.0 * regions.rho_max ** 2),
            )
    center = np.asarray(regions.center)
    dist = np.abs(center + np.asarray(A))
    if float(dist.max()) > 2.0 * regions.eta0:
        j0 = int(np.argmax(dist)) + 1
        lamj = regions.lam[j0 - 1]
        return BranchDecision(
            kind=NO_CRITICAL, axis=j0,
            c1=regions.eta0 / regions.rho_max,
            c2=lamj / (2.0 * regions.rho_min ** 2) + lamj / regions.rho_min ** 2,
        )
    box = AxisBox.cube(regions.u0, regions.b2_radius)
    search = find_critical_point(slice_, box)
    if search.point is None:
        raise CertificationError(
            "no critical point found inside the certified window (internal)")
    return BranchDecision(kind=CRITICAL, z0=tuple(float(v) for v in search.point))


@dataclass
class SliceGeometry:
    """Certified geometry for one problem: boxes, radii ladder, regions.

    Built once per configuration at the reference coordinates (remaining
    axes frozen at the base point).  The reference chart sits at the
    exactly-critical parameters A_ref = -(scaled gradient at u0), so its
    critical point is the base point itself.
    """

    F: MultiPoly
    case: CaseReport
    x0: tuple
    u0: tuple
    v0: tuple
    slice0: PhaseSlice
    psi_cert: IFTCertificate
    delta1: float
    ref_chart: MorseChart
    regions: BranchRegions
    delta0: float
    chain_ok: bool

    def cell_slice(self, A: Sequence[float]) -> PhaseSlice:
        return self.slice0.with_A(A)

    def classify_cell(self, A: Sequence[float]) -> BranchDecision:
        return classify_branch(self.cell_slice(A), self.regions)

    def summary(self) -> str:
        r = self.regions
        lines = [
            "[geometry]",
            self.case.summary(),
            f"u0: {self.u0[0]:.17g} {self.u0[1]:.17g}",
            f"psi_m: {self.psi_cert.m:.17g}",
            f"psi_radius: {self.psi_cert.radius:.17g}",
            f"delta1: {self.delta1:.17g}",
            "[reference chart]",
            self.ref_chart.summary(),
            "[regions]",
            f"eta0: {r.eta0:.17g}",
            f"delta7: {r.delta7:.17g}",
            f"b2_radius: {r.b2_radius:.17g}",
            f"center: {r.center[0]:.17g} {r.center[1]:.17g}",
            f"delta0: {self.delta0:.17g}",
            f"delta0_within_certified_chain: {self.chain_ok}",
        ]
        return "\n".join(lines)


def _sup_psi_shift(F: MultiPoly, pair, u0, v_axes, v0, radius_u, radius_v,
                   center_u, center_v, grid_n, against_center: bool) -> float:
    """Certified sup of the scaled-gradient drift over an (u, v) box.

    against_center=True bounds || Psi_v(u) - Psi_{v0}(u0) ||_inf;
    otherwise || Psi_v(u) - Psi_v(u0) ||_inf (same v on both sides).
    """
    n = F.nvars
    i, j = pair
    comps = []
    for k in (i, j):
        xk = MultiPoly.variable(k, n)
        P = xk * F.derive(k)
        if against_center:
            c = P.eval([Fraction(float(v)) for v in _full_point(n, pair, u0, v_axes, v0)])
            Q = P - MultiPoly.constant(c, n)
        else:
            subs = {i: Fraction(float(u0[0])), j: Fraction(float(u0[1]))}
            if v_axes:
                small = P.restrict(list(v_axes), {**subs})
                Q = P - _embed(small, list(v_axes), n)
            else:
                Q = P - MultiPoly.constant(P.eval([Fraction(float(u0[0])),
                                                   Fraction(float(u0[1]))]), n)
        comps.append(Q)
    center = _full_point(n, pair, center_u, v_axes, center_v)
    radii = [0.0] * n
    radii[i - 1] = radii[j - 1] = radius_u
    for k in v_axes:
        radii[k - 1] = radius_v
    box = AxisBox(tuple(center), tuple(radii))
    return max(certified_max_abs(Q, box, grid_n).bound for Q in comps)


def _full_point(n, pair, u, v_axes, v):
    i, j = pair
    x = [0.0] * n
    x[i - 1], x[j - 1] = float(u[0]), float(u[1])
    for k, val in zip(v_axes, v):
        x[k - 1] = float(val)
    return x


def build_geometry(F: MultiPoly, case: CaseReport, x0: Sequence[float],
                   delta0: float, grid_n: int = 33) -> SliceGeometry:
    """Run the full certified chain at the reference slice.

    Stages: certify the scaled gradient map near u0, pick delta1 so the
    image of the delta1-box stays inside the certified target ball for
    every nearby frozen coordinate vector, build the reference chart at
    the exactly-critical parameters, certify its normal form, choose eta0
    by boundary-inversion containment and delta7 by the drift condition,
    then record whether the requested weight half-width sits inside the
    certified chain.
    """
    if case.case_label not in (CASE_I, CASE_II):
        raise CertificationError("geometry requires a certified case")
    i, j = case.pair
    n = F.nvars
    x0 = tuple(float(v) for v in x0)
    u0 = (x0[i - 1], x0[j - 1])
    v_axes = tuple(k for k in range(1, n + 1) if k not in (i, j))
    v0 = tuple(x0[k - 1] for k in v_axes)
    nd_grid = 9 if n >= 4 else 17

    slice0 = PhaseSlice(F, (i, j), v0, A=(0.0, 0.0))
    psi_cert = certify(slice0.psi_map(), u0,
                       seed_radius=float(case.box.radius[0]), grid_n=grid_n)

    # delta1: image containment in the certified ball, uniformly in v
    delta1 = min(0.95 * psi_cert.radius, 0.99 * case.rho_min / 2.0)
    while True:
        if delta1 < 1e-10:
            raise CertificationError("delta1 underflow")
        sup = _sup_psi_shift(F, (i, j), u0, v_axes, v0, delta1, delta1,
                             u0, v0, nd_grid, against_center=False)
        if math.sqrt(2.0) * sup <= 0.9 * psi_cert.m / 2.0:
            break
        delta1 *= 0.5

    # reference chart at the exactly critical parameters
    a_ref = -slice0.scaled_gradient(u0)
    slice_ref = slice0.with_A(a_ref)
    chart = decompose_phase(slice_ref, u0, delta1, case.case_label, grid_n=grid_n)
    chart.certify_morse(grid_n=grid_n)

    # eta0 by boundary inversion into the chart box
    b2_radius = chart.delta6
    eta0 = 2.0 ** math.floor(math.log2(max(psi_cert.v_radius / 12.0, 1e-12)))
    psi_map = slice0.psi_map()
    center_img = slice0.scaled_gradient(u0)
    while eta0 >= 1e-12:
        if 7.0 * eta0 * math.sqrt(2.0) < psi_cert.v_radius:
            bbox = AxisBox.cube(center_img, 7.0 * eta0)
            bpts = _eta_boundary(bbox, 257)
            gap = 14.0 * eta0 / 256.0
            margin = psi_cert.bilip * gap
            ok = True
            for y in bpts:
                try:
                    u = invert(psi_cert, psi_map, y)
                except Exception:
                    ok = False
                    break
                if float(np.max(np.abs(u - np.asarray(u0)))) > b2_radius - margin:
                    ok = False
                    break
            if ok:
                break
        eta0 *= 0.5
    if eta0 < 1e-12:
        raise CertificationError("eta0 underflow in containment search")

    # delta7 by the drift condition against the reference image
    delta7 = min(b2_radius, 0.95 * delta1)
    while True:
        if delta7 < 1e-14:
            raise CertificationError("delta7 underflow")
        sup = _sup_psi_shift(F, (i, j), u0, v_axes, v0, 2.0 * delta7, 2.0 * delta7,
                             u0, v0, nd_grid, against_center=True)
        if sup < 0.97 * eta0 / 2.0:
            break
        delta7 *= 0.5

    regions = BranchRegions(
        eta0=eta0,
        center=(float(center_img[0]), float(center_img[1])),
        u0=u0,
        D1=AxisBox.cube(center_img, eta0),
        D2=AxisBox.cube(center_img, 3.0 * eta0),
        lam=case.lam,
        rho_min=case.rho_min,
        rho_max=case.rho_max,
        delta7=delta7,
        b2_radius=b2_radius,
        b3_radius=delta7,
    )
    return SliceGeometry(
        F=F, case=case, x0=x0, u0=u0, v0=v0, slice0=slice0,
        psi_cert=psi_cert, delta1=delta1, ref_chart=chart, regions=regions,
        delta0=float(delta0), chain_ok=bool(delta0 < delta7),
    )


def _eta_boundary(box: AxisBox, n_per_edge: int) -> np.ndarray:
    lo, hi = box.lo(), box.hi()
    ts = np.linspace(lo[0], hi[0], n_per_edge)
    ss = np.linspace(lo[1], hi[1], n_per_edge)
    return np.concatenate([
        np.stack([ts, np.full_like(ts, lo[1])], axis=-1),
        np.stack([ts, np.full_like(ts, hi[1])], axis=-1),
        np.stack([np.full_like(ss, lo[0]), ss], axis=-1),
        np.stack([np.full_like(ss, hi[0]), ss], axis=-1),
    ], axis=0)

"""Axis boxes and sound numerical bounds for polynomials on boxes.

Certification here means: evaluate on a dense uniform grid and add a
rigorous Lipschitz pad derived from coefficient-norm bounds on the
gradient, so that grid minima minus the pad are true lower bounds and
grid maxima plus the pad are true upper bounds over the whole box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .polyring import MultiPoly


@dataclass(frozen=True)
class AxisBox:
    """Axis-aligned box given by a center and per-axis radii."""

    center: tuple
    radius: tuple

    def __post_init__(self):
        if len(self.center) != len(self.radius):
            raise ValueError("center and radius dimensions differ")
        if any(r < 0 for r in self.radius):
            raise ValueError("radii must be nonnegative")

    @classmethod
    def cube(cls, center: Sequence[float], radius: float) -> "AxisBox":
        c = tuple(float(x) for x in center)
        return cls(c, (float(radius),) * len(c))

    @property
    def ndim(self) -> int:
        return len(self.center)

    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.radius)

    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.radius)

    def inside_unit_cube(self) -> bool:
        return bool(np.all(self.lo() > 0.0) and np.all(self.hi() < 1.0))

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo() - tol) and np.all(x <= self.hi() + tol))

    def scaled(self, factor: float) -> "AxisBox":
        return AxisBox(self.center, tuple(r * factor for r in self.radius))

    def axis_grid(self, k: int, n: int) -> np.ndarray:
        return np.linspace(self.lo()[k], self.hi()[k], n)

    def grid(self, n: int) -> list:
        """Per-axis uniform grids with ``n`` points each (meshgrid-ready)."""
        return [self.axis_grid(k, n) for k in range(self.ndim)]

    def mesh(self, n: int) -> list:
        axes = self.grid(n)
        return list(np.meshgrid(*axes, indexing="ij", sparse=True))

    def corners(self) -> np.ndarray:
        lo, hi = self.lo(), self.hi()
        pts = np.array(np.meshgrid(*[(l, h) for l, h in zip(lo, hi)], indexing="ij"))
        return pts.reshape(self.ndim, -1).T


def monomial_sup(box: AxisBox, expo) -> float:
    """Upper bound of |x^expo| over the box (abs per axis)."""
    lo, hi = box.lo(), box.hi()
    out = 1.0
    for a, l, h in zip(expo, lo, hi):
        if a:
            out *= max(abs(l), abs(h)) ** a
    return out


def poly_abs_bound(p: MultiPoly, box: AxisBox) -> float:
    """Coefficient-norm upper bound of |p| over the box."""
    if p.nvars != box.ndim:
        raise ValueError("polynomial and box dimensions differ")
    return float(sum(abs(float(c)) * monomial_sup(box, e) for e, c in p.terms.items()))


def gradient_pad(p: MultiPoly, box: AxisBox, n: int) -> float:
    """Lipschitz pad for a uniform n-per-axis grid on the box.

    Any point of the box is within half a grid spacing per axis of a grid
    point, so |p(x) - p(x_grid)| <= sum_k sup|dp/dx_k| * h_k / 2.
    """
    pad = 0.0
    for k in range(box.ndim):
        h = 2.0 * box.radius[k] / max(n - 1, 1)
        pad += poly_abs_bound(p.derive(k + 1), box) * h / 2.0
    return pad


def grid_values(p: MultiPoly, box: AxisBox, n: int) -> np.ndarray:
    return p.eval_array(box.mesh(n))


@dataclass(frozen=True)
class CertifiedBound:
    """A sound bound together with its raw grid value and pad."""

    bound: float
    grid_value: float
    pad: float


def certified_min_abs(p: MultiPoly, box: AxisBox, n: int = 33) -> CertifiedBound:
    """Sound lower bound for min |p| over the box (may be <= 0)."""
    vals = np.abs(grid_values(p, box, n))
    gmin = float(vals.min())
    pad = gradient_pad(p, box, n)
    return CertifiedBound(gmin - pad, gmin, pad)


def certified_max_abs(p: MultiPoly, box: AxisBox, n: int = 33) -> CertifiedBound:
    """Sound upper bound for max |p| over the box."""
    vals = np.abs(grid_values(p, box, n))
    gmax = float(vals.max())
    pad = gradient_pad(p, box, n)
    return CertifiedBound(gmax + pad, gmax, pad)


def sign_constant(p: MultiPoly, box: AxisBox, n: int = 33) -> int:
    """Certified constant sign of p on the box: +1 or -1, 0 if uncertified."""
    vals = grid_values(p, box, n)
    pad = gradient_pad(p, box, n)
    if float(vals.min()) - pad > 0.0:
        return 1
    if float(vals.max()) + pad < 0.0:
        return -1
    return 0

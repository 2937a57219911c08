"""Exact sparse multivariate polynomial arithmetic over the rationals.

A polynomial is a map from exponent vectors to nonzero Fraction
coefficients.  All arithmetic in this module (addition, multiplication,
differentiation, substitution, divisibility) is exact; floats only appear
when a caller evaluates at float points.  This is the symbolic substrate
for the case classification, the pair search, and the phase decomposition
in the rest of the package.

Variables are 1-based: ``x1 .. xn``.  The text format is a signed sum of
terms ``c*x1^a1*...*xn^an`` with rational ``c`` written as ``p`` or
``p/q``; the printer and parser round-trip exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

import numpy as np

Expo = tuple  # tuple[int, ...]
Scalar = Union[int, Fraction]


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, float):
        # binary floats are exact rationals
        return Fraction(c)
    raise TypeError(f"coefficient of unsupported type {type(c)!r}")


def grlex_key(expo: Expo):
    """Graded lexicographic sort key (total degree first, then lex)."""
    return (sum(expo), expo)


class MultiPoly:
    """Sparse exact polynomial in ``nvars`` variables over Fraction.

    Invariants: no stored coefficient is zero, every exponent vector has
    length ``nvars``.  Instances are treated as immutable; every operation
    returns a new polynomial.
    """

    __slots__ = ("terms", "nvars")

    def __init__(self, terms: Mapping[Expo, Scalar], nvars: int):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        clean = {}
        for expo, coef in terms.items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != nvars:
                raise ValueError(f"exponent vector {expo} has length != nvars={nvars}")
            if any(e < 0 for e in expo):
                raise ValueError(f"negative exponent in {expo}")
            c = _as_fraction(coef)
            if c != 0:
                clean[expo] = clean.get(expo, Fraction(0)) + c
                if clean[expo] == 0:
                    del clean[expo]
        self.terms = clean
        self.nvars = nvars

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "MultiPoly":
        return cls({}, nvars)

    @classmethod
    def constant(cls, c, nvars: int) -> "MultiPoly":
        return cls({(0,) * nvars: _as_fraction(c)}, nvars)

    @classmethod
    def variable(cls, k: int, nvars: int) -> "MultiPoly":
        """The monomial x_k (1-based index)."""
        if not 1 <= k <= nvars:
            raise ValueError(f"variable index {k} out of range 1..{nvars}")
        expo = tuple(1 if i == k - 1 else 0 for i in range(nvars))
        return cls({expo: Fraction(1)}, nvars)

    # -- basic queries -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def is_homogeneous(self) -> bool:
        if not self.terms:
            return True
        degs = {sum(e) for e in self.terms}
        return len(degs) == 1

    def homogeneous_part(self, ell: int) -> "MultiPoly":
        """Sum of the terms of total degree exactly ``ell``."""
        return MultiPoly(
            {e: c for e, c in self.terms.items() if sum(e) == ell}, self.nvars
        )

    def leading(self) -> tuple:
        """Leading (exponent, coefficient) in graded lex order."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self.terms, key=grlex_key)
        return e, self.terms[e]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MultiPoly)
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        return f"MultiPoly({format_poly(self)!r}, nvars={self.nvars})"

    # -- arithmetic --------------------------------------------------------

    def _check_compat(self, other: "MultiPoly"):
        if self.nvars != other.nvars:
            raise ValueError("operands have different nvars")

    def __add__(self, other) -> "MultiPoly":
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.constant(other, self.nvars)
        self._check_compat(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, Fraction(0)) + c
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        p = MultiPoly.__new__(MultiPoly)
        p.terms, p.nvars = out, self.nvars
        return p

    def __radd__(self, other) -> "MultiPoly":
        return self.__add__(other)

    def __neg__(self) -> "MultiPoly":
        p = MultiPoly.__new__(MultiPoly)
        p.terms = {e: -c for e, c in self.terms.items()}
        p.nvars = self.nvars
        return p

    def __sub__(self, other) -> "MultiPoly":
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.constant(other, self.nvars)
        return self.__add__(other.__neg__())

    def __rsub__(self, other) -> "MultiPoly":
        return (-self).__add__(other)

    def __mul__(self, other) -> "MultiPoly":
        if isinstance(other, (int, Fraction)):
            c0 = _as_fraction(other)
            if c0 == 0:
                return MultiPoly.zero(self.nvars)
            p = MultiPoly.__new__(MultiPoly)
            p.terms = {e: c * c0 for e, c in self.terms.items()}
            p.nvars = self.nvars
            return p
        self._check_compat(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(e, None)
                else:
                    out[e] = s
        p = MultiPoly.__new__(MultiPoly)
        p.terms, p.nvars = out, self.nvars
        return p

    def __rmul__(self, other) -> "MultiPoly":
        return self.__mul__(other)

    def __pow__(self, k: int) -> "MultiPoly":
        if k < 0:
            raise ValueError("negative power")
        out = MultiPoly.constant(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    # -- calculus and substitution -----------------------------------------

    def derive(self, j: int) -> "MultiPoly":
        """Exact formal partial derivative with respect to x_j (1-based)."""
        if not 1 <= j <= self.nvars:
            raise ValueError(f"variable index {j} out of range 1..{self.nvars}")
        jj = j - 1
        out = {}
        for e, c in self.terms.items():
            a = e[jj]
            if a == 0:
                continue
            ne = e[:jj] + (a - 1,) + e[jj + 1 :]
            s = out.get(ne, Fraction(0)) + c * a
            if s == 0:
                out.pop(ne, None)
            else:
                out[ne] = s
        p = MultiPoly.__new__(MultiPoly)
        p.terms, p.nvars = out, self.nvars
        return p

    def eval(self, point: Sequence) -> Union[Fraction, float, complex]:
        """Evaluate at a point; exact when all coordinates are int/Fraction."""
        if len(point) != self.nvars:
            raise ValueError("point has wrong dimension")
        exact = all(isinstance(x, (int, Fraction)) for x in point)
        total = None
        for e, c in self.terms.items():
            term = c if exact else float(c)
            for x, a in zip(point, e):
                if a:
                    term = term * x**a
            total = term if total is None else total + term
        if total is None:
            return Fraction(0) if exact else 0.0
        return total

    def eval_array(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorized float evaluation on broadcastable coordinate arrays."""
        if len(axes) != self.nvars:
            raise ValueError("need one coordinate array per variable")
        out = None
        for e, c in self.terms.items():
            term = float(c)
            for x, a in zip(axes, e):
                if a:
                    term = term * x**a
            out = term if out is None else out + term
        if out is None:
            return np.zeros(np.broadcast_shapes(*[np.shape(a) for a in axes]))
        return out + np.zeros(np.broadcast_shapes(*[np.shape(a) for a in axes]))

    def compile_float(self):
        """Return a fast float evaluator f(point_sequence) for Newton loops."""
        data = [(float(c), e) for e, c in self.terms.items()]

        def f(point):
            total = 0.0
            for c, e in data:
                t = c
                for x, a in zip(point, e):
                    if a:
                        t *= x**a
                total += t
            return total

        return f

    def restrict(self, keep: Sequence[int], values: Mapping[int, Scalar]) -> "MultiPoly":
        """Substitute exact values for all variables except ``keep``.

        ``keep`` lists 1-based variable indices, in the order they become
        the new variables; ``values`` maps each remaining 1-based index to
        an int/Fraction value.  Exact.
        """
        keep = list(keep)
        others = [k for k in range(1, self.nvars + 1) if k not in keep]
        missing = [k for k in others if k not in values]
        if missing:
            raise ValueError(f"no substitution value for variables {missing}")
        vals = {k: _as_fraction(values[k]) for k in others}
        out = {}
        for e, c in self.terms.items():
            coef = c
            for k in others:
                a = e[k - 1]
                if a:
                    coef *= vals[k] ** a
            if coef == 0:
                continue
            ne = tuple(e[k - 1] for k in keep)
            s = out.get(ne, Fraction(0)) + coef
            if s == 0:
                out.pop(ne, None)
            else:
                out[ne] = s
        return MultiPoly(out, len(keep))

    def shift(self, offsets: Sequence) -> "MultiPoly":
        """Recenter exactly: returns p(x1 + z1, ..., xn + zn)."""
        if len(offsets) != self.nvars:
            raise ValueError("offset vector has wrong dimension")
        out = self
        for j, z in enumerate(offsets, start=1):
            z = _as_fraction(z)
            if z == 0:
                continue
            shifted = {}
            for e, c in out.terms.items():
                a = e[j - 1]
                # (x + z)^a by binomial expansion
                binom = 1
                zpow = Fraction(1)
                for k in range(a, -1, -1):
                    ne = e[: j - 1] + (k,) + e[j:]
                    s = shifted.get(ne, Fraction(0)) + c * binom * zpow
                    if s == 0:
                        shifted.pop(ne, None)
                    else:
                        shifted[ne] = s
                    binom = binom * k // (a - k + 1) if k > 0 else binom
                    zpow *= z
            out = MultiPoly(shifted, self.nvars)
        return out


@dataclass(frozen=True)
class MonomialSplit:
    """Termwise four-way split of a polynomial relative to a variable pair.

    ``f1`` holds the monomials divisible by x_i but not x_j, ``f2`` those
    divisible by x_j but not x_i, ``g`` those divisible by both, ``f0`` the
    rest.  ``f1 + g + f2 + f0`` reconstructs the input exactly.
    """

    f1: MultiPoly
    g: MultiPoly
    f2: MultiPoly
    f0: MultiPoly


def split_monomials(F: MultiPoly, i: int, j: int) -> MonomialSplit:
    """Split ``F`` termwise by divisibility with respect to x_i and x_j."""
    if i == j:
        raise ValueError("indices must differ")
    for k in (i, j):
        if not 1 <= k <= F.nvars:
            raise ValueError(f"variable index {k} out of range")
    parts = {"f1": {}, "g": {}, "f2": {}, "f0": {}}
    for e, c in F.terms.items():
        di, dj = e[i - 1] > 0, e[j - 1] > 0
        key = "g" if (di and dj) else "f1" if di else "f2" if dj else "f0"
        parts[key][e] = c
    n = F.nvars
    return MonomialSplit(
        f1=MultiPoly(parts["f1"], n),
        g=MultiPoly(parts["g"], n),
        f2=MultiPoly(parts["f2"], n),
        f0=MultiPoly(parts["f0"], n),
    )


def valuation(g: MultiPoly, k: int) -> int:
    """Largest power of x_k dividing ``g`` (minimum exponent over terms)."""
    if g.is_zero():
        raise ValueError("valuation of the zero polynomial is undefined")
    if not 1 <= k <= g.nvars:
        raise ValueError(f"variable index {k} out of range")
    return min(e[k - 1] for e in g.terms)


def divides(f: MultiPoly, g: MultiPoly) -> Optional[MultiPoly]:
    """Exact divisibility test: quotient q with f*q == g, else None.

    Single-divisor reduction in graded lex order.  The first remainder
    lead term not divisible by the lead term of ``f`` certifies
    non-divisibility, since any nonzero remainder with that property
    cannot be a multiple of ``f``.
    """
    if f.is_zero():
        raise ValueError("divisor must be nonzero")
    f._check_compat(g)
    if g.is_zero():
        return MultiPoly.zero(g.nvars)
    lead_e, lead_c = f.leading()
    quotient = {}
    rem = g
    while not rem.is_zero():
        re, rc = rem.leading()
        qe = tuple(a - b for a, b in zip(re, lead_e))
        if any(a < 0 for a in qe):
            return None
        qc = rc / lead_c
        quotient[qe] = qc
        rem = rem - MultiPoly({qe: qc}, g.nvars) * f
    return MultiPoly(quotient, g.nvars)


def scaled_gradient_det(F: MultiPoly, i: int, j: int) -> MultiPoly:
    """Jacobian determinant form of the scaled-gradient pair for (x_i, x_j).

    The map u -> (x_i dF/dx_i, x_j dF/dx_j) has Jacobian determinant

        (x_i F_ii + F_i)(x_j F_jj + F_j) - x_i x_j F_ij^2,

    computed here exactly.  For homogeneous F of degree d > 1 the result
    is homogeneous of degree 2(d-1) or identically zero.
    """
    if i == j:
        raise ValueError("indices must differ")
    Fi = F.derive(i)
    Fj = F.derive(j)
    Fii = Fi.derive(i)
    Fjj = Fj.derive(j)
    Fij = Fi.derive(j)
    xi = MultiPoly.variable(i, F.nvars)
    xj = MultiPoly.variable(j, F.nvars)
    return (xi * Fii + Fi) * (xj * Fjj + Fj) - xi * xj * Fij * Fij


def diagonal_factor(F: MultiPoly, i: int) -> MultiPoly:
    """The factor x_i * d2F/dx_i^2 + dF/dx_i appearing in the determinant form."""
    Fi = F.derive(i)
    return MultiPoly.variable(i, F.nvars) * Fi.derive(i) + Fi


# -- text format ------------------------------------------------------------

_TERM_RE = re.compile(r"^\s*(?:(?P<coef>-?\d+(?:/\d+)?)\s*)?(?P<mono>(?:\*?\s*x\d+(?:\^\d+)?\s*)*)$")
_FACTOR_RE = re.compile(r"x(\d+)(?:\^(\d+))?")


def format_poly(p: MultiPoly) -> str:
    """Canonical text form: grlex-descending signed sum of ``c*x1^a*...``."""
    if p.is_zero():
        return "0"
    chunks = []
    for e in sorted(p.terms, key=grlex_key, reverse=True):
        c = p.terms[e]
        factors = [
            f"x{k + 1}" if a == 1 else f"x{k + 1}^{a}"
            for k, a in enumerate(e)
            if a > 0
        ]
        mag = abs(c)
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = str(mag) + "*" + "*".join(factors)
        chunks.append(("-" if c < 0 else "+", body))
    sign, body = chunks[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in chunks[1:]:
        out += f" {sign} {body}"
    return out


def parse_poly(text: str, nvars: Optional[int] = None) -> MultiPoly:
    """Parse the text format produced by :func:`format_poly`.

    Accepts liberal whitespace, optional ``*`` between factors, integer or
    ``p/q`` coefficients, and ``x3`` as shorthand for ``x3^1``.  When
    ``nvars`` is omitted it is inferred from the largest variable index.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty polynomial text")
    # split into signed terms at top level
    pieces = []
    sign = 1
    buf = ""
    for ch in s:
        if ch in "+-":
            if buf.strip():
                pieces.append((sign, buf))
                sign = 1 if ch == "+" else -1
                buf = ""
            else:
                # leading sign or sign following an operator
                sign = sign * (1 if ch == "+" else -1)
        else:
            buf += ch
    if buf.strip():
        pieces.append((sign, buf))
    if not pieces:
        raise ValueError(f"cannot parse polynomial text {text!r}")

    raw_terms = []
    max_var = 0
    for sgn, chunk in pieces:
        m = _TERM_RE.match(chunk)
        if not m:
            raise ValueError(f"cannot parse term {chunk!r}")
        coef = Fraction(m.group("coef")) if m.group("coef") else Fraction(1)
        expos = {}
        for fm in _FACTOR_RE.finditer(m.group("mono") or ""):
            k = int(fm.group(1))
            a = int(fm.group(2)) if fm.group(2) else 1
            expos[k] = expos.get(k, 0) + a
            max_var = max(max_var, k)
        raw_terms.append((sgn * coef, expos))

    n = nvars if nvars is not None else max(max_var, 1)
    if max_var > n:
        raise ValueError(f"variable x{max_var} exceeds nvars={n}")
    terms = {}
    for coef, expos in raw_terms:
        e = tuple(expos.get(k, 0) for k in range(1, n + 1))
        terms[e] = terms.get(e, Fraction(0)) + coef
    return MultiPoly(terms, n)

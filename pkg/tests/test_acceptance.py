"""Acceptance suite: one test per criterion, each printing a PASS line.

Every tolerance is pinned here; runtime budgets are asserted with the
wall clock of the test body itself.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from oscbench.harness import (
    fresnel_decay,
    refine_t_count,
    refine_tau_grid,
    sweep,
    tau_grid,
)
from oscbench.hypotheses import find_good_pair
from oscbench.ift import certify, invert, linear_map
from oscbench.polyring import (
    MultiPoly,
    divides,
    parse_poly,
    scaled_gradient_det,
    split_monomials,
    valuation,
)
from oscbench.stphase import decompose_phase

from test_ift import bilip_check

XS = sp.symbols("x1:6")


def to_sympy(p: MultiPoly):
    expr = sp.Integer(0)
    for e, c in p.terms.items():
        term = sp.Rational(c.numerator, c.denominator)
        for x, a in zip(XS, e):
            if a:
                term *= x**a
        expr += term
    return sp.expand(expr)


def random_poly(rng, nvars, max_deg, homogeneous=False, n_terms=None):
    n_terms = n_terms or int(rng.integers(2, 6))
    deg = int(rng.integers(2, max_deg + 1))
    terms = {}
    for _ in range(n_terms):
        if homogeneous:
            e = [0] * nvars
            for _ in range(deg):
                e[int(rng.integers(0, nvars))] += 1
            e = tuple(e)
        else:
            e = tuple(int(rng.integers(0, max_deg + 1)) for _ in range(nvars))
            if sum(e) > max_deg:
                e = tuple(min(a, 1) for a in e)
        c = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 10)))
        if c:
            terms[e] = terms.get(e, Fraction(0)) + c
    p = MultiPoly({e: c for e, c in terms.items() if c}, nvars)
    return p if not p.is_zero() else MultiPoly.variable(1, nvars) ** deg


def test_criterion_1_symbolic_suite():
    start = time.monotonic()
    rng = np.random.default_rng(20250809)
    forms = 0
    while forms < 200:
        n = int(rng.integers(2, 6))
        homogeneous = bool(rng.integers(0, 2))
        F = random_poly(rng, n, 4, homogeneous=homogeneous)
        gens = XS[:n]
        SF = to_sympy(F)

        # determinant form against a fresh symbolic expansion
        i = int(rng.integers(1, n))
        j = int(rng.integers(i + 1, n + 1))
        xi, xj = XS[i - 1], XS[j - 1]
        oracle = sp.expand(
            (xi * sp.diff(SF, xi, 2) + sp.diff(SF, xi))
            * (xj * sp.diff(SF, xj, 2) + sp.diff(SF, xj))
            - xi * xj * sp.diff(SF, xi, xj) ** 2)
        assert sp.expand(to_sympy(scaled_gradient_det(F, i, j)) - oracle) == 0

        # divisibility both ways against sympy division
        h = random_poly(rng, n, 2, n_terms=2)
        q = divides(F, F * h)
        assert q == h
        g_bad = F * h + MultiPoly.variable(1, n)
        ours = divides(F, g_bad) is not None
        _, rem = sp.div(to_sympy(g_bad), SF, *gens, domain="QQ")
        assert ours == (sp.expand(rem) == 0)

        # valuation against the sympy monomial list
        k = int(rng.integers(1, n + 1))
        if not F.is_zero():
            monoms = sp.Poly(SF, *gens).monoms()
            assert valuation(F, k) == min(m[k - 1] for m in monoms)

        # four-way split reconstructs in the oracle representation
        spn = split_monomials(F, i, j)
        total = sum((to_sympy(part) for part in (spn.f1, spn.g, spn.f2, spn.f0)),
                    sp.Integer(0))
        assert sp.expand(total - SF) == 0

        # Euler identity, exact
        if homogeneous:
            d = F.degree()
            euler = MultiPoly.zero(n)
            for a in range(1, n + 1):
                euler = euler + MultiPoly.variable(a, n) * F.derive(a)
            assert euler == F * d

        forms += 1
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"criterion 1 runtime {elapsed:.1f}s"
    print(f"\n[PASS] criterion 1: symbolic suite on {forms} random forms "
          f"({elapsed:.1f}s)")


def test_criterion_2_pair_search():
    start = time.monotonic()
    assert find_good_pair(parse_poly("x1^2+x2^2+x3^2+x4^2+x5^2")) == (1, 2)
    assert find_good_pair(parse_poly("x1*x2*x3 - x4^3")) == (1, 4)
    assert find_good_pair(parse_poly("x1^2 + x1*x2 + x2^2 - x3^2")) == (1, 2)
    assert find_good_pair(parse_poly("x1*x2", nvars=2)) is None
    elapsed = time.monotonic() - start
    assert elapsed < 5.0
    print(f"\n[PASS] criterion 2: constructive pair search on the bundle "
          f"({elapsed:.2f}s)")


def test_criterion_3_ift_certificates(quadric_problem, cross_problem):
    start = time.monotonic()
    rng = np.random.default_rng(3)
    issued = [
        (certify(linear_map(np.eye(2)), (0.0, 0.0), 1.0), linear_map(np.eye(2))),
        (certify(linear_map(np.diag([2.0, 1.0])), (0.0, 0.0), 1.0),
         linear_map(np.diag([2.0, 1.0]))),
        (quadric_problem.geometry.psi_cert, quadric_problem.geometry.slice0.psi_map()),
        (cross_problem.geometry.psi_cert, cross_problem.geometry.slice0.psi_map()),
        (quadric_problem.geometry.ref_chart.cert,
         quadric_problem.geometry.ref_chart.fmap),
        (cross_problem.geometry.ref_chart.cert, cross_problem.geometry.ref_chart.fmap),
    ]
    for cert, m2 in issued:
        assert bilip_check(cert, m2, rng, pairs=1000) == 0
        f0 = np.asarray(m2.eval(np.asarray(cert.x0)), dtype=float)
        for _ in range(100):
            ang = rng.uniform(0, 2 * math.pi)
            rad = rng.uniform(0, cert.v_radius * 0.999)
            y = f0 + rad * np.array([math.cos(ang), math.sin(ang)])
            x = invert(cert, m2, y)
            assert np.linalg.norm(np.asarray(m2.eval(x)) - y) < 1e-12
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    print(f"\n[PASS] criterion 3: {len(issued)} certificates, 1000-pair "
          f"bi-Lipschitz and 100 round-trips each ({elapsed:.1f}s)")


def _chart_residuals(chart, points, rng):
    pts6 = rng.uniform(-chart.delta6, chart.delta6, size=(points, 2))
    morse = float(np.max(chart.morse_identity_residual(pts6[:, 0], pts6[:, 1])))
    pts4 = rng.uniform(-chart.delta4, chart.delta4, size=(points, 2))
    decomp = float(np.max(np.abs(
        chart.decomposition_value(pts4[:, 0], pts4[:, 1])
        - chart.centered_phase(pts4[:, 0], pts4[:, 1]))))
    return morse, decomp


def test_criterion_4_stationary_phase(quadric_problem, cross_problem):
    start = time.monotonic()
    rng = np.random.default_rng(4)
    for problem in (quadric_problem, cross_problem):
        geom = problem.geometry
        charts = [geom.ref_chart]
        # an off-center critical cell: tune A so the chart sits away from u0
        z = np.asarray(geom.u0) + np.array([0.3, -0.2]) * geom.regions.b2_radius
        a_off = -geom.slice0.scaled_gradient(z)
        sl = geom.cell_slice(tuple(a_off))
        chart = decompose_phase(sl, z, geom.delta1, geom.case.case_label)
        chart.certify_morse()
        charts.append(chart)
        for ch in charts:
            morse, decomp = _chart_residuals(ch, 1000, rng)
            assert morse < 1e-9, f"{problem.config.name}: morse {morse:.2e}"
            assert decomp < 1e-10, f"{problem.config.name}: decomp {decomp:.2e}"
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    print(f"\n[PASS] criterion 4: normal-form and decomposition identities on "
          f"both cases, 1000 points each ({elapsed:.1f}s)")


def test_criterion_5_first_derivative_bounds():
    from oscbench.vdc_trials import run_trials

    start = time.monotonic()
    part_one = run_trials(100, seed=2025)
    viol_one = [t for t in part_one
                if t.measured > t.bound_first + t.quad_err + 1e-14]
    part_two = run_trials(100, seed=2026)
    viol_two = [t for t in part_two
                if t.measured > t.bound_second + t.quad_err + 1e-14]
    assert not viol_one and not viol_two
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    print(f"\n[PASS] criterion 5: 100 randomized trials per bound, zero "
          f"violations ({elapsed:.1f}s)")


def test_criterion_6_fresnel_decay():
    start = time.monotonic()
    report = fresnel_decay(10.0, 1e4, points=9)
    assert abs(report.slope + 0.5) <= 0.05, f"slope {report.slope:.4f}"
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    print(f"\n[PASS] criterion 6: partial-integral decay slope "
          f"{report.slope:.3f} in -0.5 +- 0.05 ({elapsed:.1f}s)")


@pytest.fixture(scope="module")
def acceptance_sweep(quadric_problem):
    taus = tau_grid("1:1e3:log8")
    return sweep(quadric_problem, taus, t_mult=10.0, nt=9)


def test_criterion_7_main_sweep(quadric_problem, acceptance_sweep):
    start = time.monotonic()
    base = acceptance_sweep
    assert math.isfinite(base.c_hat) and base.c_hat > 0
    assert base.flagged == 0
    assert sum(base.tally.values()) == len(base.cells)
    for cell in base.cells:
        assert cell[base.nvars + 4] in ("LargeA", "NoCritical", "Critical")

    refined = sweep(quadric_problem, refine_tau_grid(np.asarray(base.tau_values)),
                    t_mult=10.0, nt=refine_t_count(9))
    assert refined.flagged == 0
    assert base.c_hat * (1 - 1e-12) <= refined.c_hat <= 2.0 * base.c_hat
    elapsed = time.monotonic() - start
    assert elapsed < 900.0
    print(f"\n[PASS] criterion 7: sweep c_hat {base.c_hat:.4e}, refined "
          f"{refined.c_hat:.4e} (ratio {refined.c_hat / base.c_hat:.3f}), "
          f"{len(base.cells)}+{len(refined.cells)} cells, zero flagged "
          f"({elapsed:.1f}s)")


def test_criterion_8_determinism(quadric_problem, acceptance_sweep, tmp_path):
    start = time.monotonic()
    taus = tau_grid("1:1e3:log8")
    again = sweep(quadric_problem, taus, t_mult=10.0, nt=9)
    assert again.to_json() == acceptance_sweep.to_json()

    d1, d2 = tmp_path / "a", tmp_path / "b"
    acceptance_sweep.write(d1, figures=False)
    again.write(d2, figures=False)
    for name in ("sweep_report.json", "sweep_cells.csv"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    elapsed = time.monotonic() - start
    print(f"\n[PASS] criterion 8: byte-identical reports on rerun "
          f"({elapsed:.1f}s)")

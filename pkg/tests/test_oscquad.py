import math

import numpy as np
import pytest

from oscbench.errors import QuadratureError
from oscbench.hypotheses import build_weight, bump
from oscbench.oscquad import (
    PhaseProblem,
    batch_phase_integrals,
    fresnel_partial,
    fresnel_profile,
    integrate_1d,
    integrate_phase,
    vdc_bound_i,
    vdc_bound_ii,
)
from oscbench.polyring import MultiPoly, parse_poly


def P(text, n=None):
    return parse_poly(text, nvars=n)


# -- 1d quadrature ---------------------------------------------------------------------


def test_linear_integral():
    r = integrate_1d(lambda s: s + 0j, 0.0, 1.0, 1e-12)
    assert abs(r.value - 0.5) < 1e-12
    assert r.abs_error_estimate >= 0


def test_full_periods_cancel():
    r = integrate_1d(lambda s: np.exp(2j * np.pi * 10 * s), 0.0, 1.0, 1e-12,
                     initial_panels=16)
    assert abs(r.value) < 1e-10


def test_bump_integral_against_composite_oracle():
    xs = np.linspace(-1.0, 1.0, 1_000_001)
    vals = bump(xs)
    oracle = float(np.trapezoid(vals, xs))
    r = integrate_1d(lambda s: bump(s) + 0j, -1.0, 1.0, 1e-13, initial_panels=8)
    assert abs(r.value.real - oracle) < 1e-10
    assert abs(r.value.imag) == 0.0


def test_quadrature_validation():
    with pytest.raises(ValueError):
        integrate_1d(lambda s: s, 1.0, 0.0, 1e-10)
    with pytest.raises(ValueError):
        integrate_1d(lambda s: s, 0.0, 1.0, -1.0)


def test_subdivision_limit():
    # a discontinuity defeats the panel rule at tight tolerance
    with pytest.raises(QuadratureError):
        integrate_1d(lambda s: np.sign(s - 1 / 3) + 0j, 0.0, 1.0, 1e-15,
                     max_rounds=8)


# -- Fresnel partials --------------------------------------------------------------------


def test_fresnel_empty_interval():
    assert fresnel_partial(-1.0, 1.0, 100.0, 1).value == 0.0


def test_fresnel_full_integral_limit():
    # closed form: |integral over R of e^{2 pi i tau s^2}| = 1/sqrt(2 tau)
    tau = 50.0
    q = fresnel_partial(40.0, 40.0, tau, 1)
    assert abs(q.value) == pytest.approx(1.0 / math.sqrt(2 * tau), rel=1e-3)


def test_fresnel_validation():
    with pytest.raises(ValueError):
        fresnel_partial(0.0, 1.0, 0.0, 1)
    with pytest.raises(ValueError):
        fresnel_partial(2.0, 1.0, 10.0, 1)
    with pytest.raises(ValueError):
        fresnel_partial(0.0, 1.0, 10.0, 2)


def test_fresnel_scaled_sup_stable():
    from oscbench.oscquad import fresnel_sup_points

    sups = []
    ys = fresnel_sup_points(1.0)
    for tau in (1.0, 10.0, 100.0, 1000.0, 10000.0):
        prof = fresnel_profile(ys, 1.0, tau, 1)
        sups.append(float(np.max(np.abs(prof))) * math.sqrt(tau))
    sups = np.asarray(sups)
    assert sups.max() / sups.min() < 1.10


def test_fresnel_profile_matches_partial():
    ys = np.linspace(-1.0, 1.0, 9)
    prof = fresnel_profile(ys, 1.0, 37.0, -1)
    for y, v in zip(ys, prof):
        q = fresnel_partial(float(y), 1.0, 37.0, -1)
        assert abs(v - q.value) < 1e-10


# -- first-derivative bounds ---------------------------------------------------------------


def test_vdc_formula_instantiation():
    # f(t) = t: c1 = 1, c2 = 0 collapses the first bound to 2(b-a)P/|tau|
    assert vdc_bound_i((0.0, 1.0, 0.1), 1.0, 0.0, 3.0, 10.0) == pytest.approx(0.6)
    assert vdc_bound_ii((0.0, 1.0, 0.1), 2.0, 3.0, 10.0) == pytest.approx(0.6)


def test_vdc_preconditions():
    for fn in (lambda: vdc_bound_i((0, 1, 0.1), 0.0, 1.0, 1.0, 1.0),
               lambda: vdc_bound_i((0, 1, 0.1), 1.0, 1.0, 1.0, 0.0),
               lambda: vdc_bound_i((1, 0, 0.1), 1.0, 1.0, 1.0, 1.0),
               lambda: vdc_bound_ii((0, 1, 0.6), 1.0, 1.0, 1.0)):
        with pytest.raises(ValueError):
            fn()


def test_vdc_soundness_sample():
    from oscbench.vdc_trials import run_trials

    trials = run_trials(25, seed=123)
    assert all(t.ok for t in trials)


# -- the nested phase integral ----------------------------------------------------------------


@pytest.fixture(scope="module")
def quadric_weight():
    return build_weight((0.3, 0.4, 0.5), 0.04)


def test_zero_phase_gives_weight_integral(quadric_weight):
    F = P("x1^2 + x2^2 - x3^2")
    prob = PhaseProblem(F=F, weight=quadric_weight, t=(0.0, 0.0, 0.0),
                        tau=0.0, pair=(1, 2))
    res = integrate_phase(prob, tol=1e-10)
    assert res.value.imag == 0.0
    assert abs(res.value.real - quadric_weight.integral()) < 1e-8
    assert res.value.real > 0


def test_conjugation_symmetry(quadric_weight):
    F = P("x1^2 + x2^2 - x3^2")
    a = integrate_phase(PhaseProblem(F=F, weight=quadric_weight,
                                     t=(5.0, -15.0, 0.0), tau=50.0, pair=(1, 2)),
                        tol=1e-10)
    b = integrate_phase(PhaseProblem(F=F, weight=quadric_weight,
                                     t=(-5.0, 15.0, 0.0), tau=-50.0, pair=(1, 2)),
                        tol=1e-10)
    assert abs(b.value - np.conj(a.value)) < 1e-12


def test_trivial_bound(quadric_weight):
    F = P("x1^2 + x2^2 - x3^2")
    wint = quadric_weight.integral()
    rng = np.random.default_rng(0)
    for _ in range(5):
        t = tuple(rng.uniform(-40, 40, size=3))
        tau = float(rng.uniform(0, 60))
        res = integrate_phase(PhaseProblem(F=F, weight=quadric_weight, t=t,
                                           tau=tau, pair=(1, 2)), tol=1e-9)
        assert abs(res.value) <= wint + 1e-8


def _random_problem(rng):
    n = 2
    terms = {}
    for _ in range(rng.integers(2, 5)):
        e = (int(rng.integers(0, 3)), int(rng.integers(0, 3)))
        terms[e] = float(rng.uniform(-2, 2))
    F = MultiPoly({e: c for e, c in terms.items() if c}, n)
    if F.is_zero():
        F = P("x1*x2", 2)
    center = rng.uniform(0.35, 0.6, size=2)
    w = build_weight(center, float(rng.uniform(0.04, 0.08)))
    t = tuple(rng.uniform(-25, 25, size=2))
    tau = float(rng.uniform(0.0, 20.0))
    return PhaseProblem(F=F, weight=w, t=t, tau=tau, pair=(1, 2))


def test_consistency_under_tolerance_halving():
    rng = np.random.default_rng(42)
    for _ in range(20):
        prob = _random_problem(rng)
        a = integrate_phase(prob, tol=2e-8)
        b = integrate_phase(prob, tol=1e-8)
        assert abs(a.value - b.value) <= a.abs_error_estimate + b.abs_error_estimate + 1e-14


def test_batch_agrees_with_cell_integration(quadric_weight):
    F = P("x1^2 + x2^2 - x3^2")
    cells = [(30.0, 4.0, -11.0), (12.0, 0.0, 7.0), (55.0, -20.0, 20.0)]
    for tau, t1, t2 in cells:
        res = integrate_phase(PhaseProblem(F=F, weight=quadric_weight,
                                           t=(t1, t2, 0.0), tau=tau, pair=(1, 2)),
                              tol=1e-10)
        vals, errs, flags, _ = batch_phase_integrals(
            F, quadric_weight, tau, (1, 2), np.array([t1]), np.array([t2]),
            t_frozen={3: 0.0}, tol=1e-13)
        assert not flags[0, 0]
        assert abs(vals[0, 0] - res.value) <= (
            errs[0, 0] + res.abs_error_estimate + 1e-13)


def test_batch_dense_path_case_one(quadric_weight):
    # the mixed monomial forces the non-separable kernel
    F = P("x1^2 + x1*x2 + x2^2 - x3^2")
    w = build_weight((0.4, 0.4, 0.6928203230275509), 0.04)
    res = integrate_phase(PhaseProblem(F=F, weight=w, t=(3.0, -8.0, 0.0),
                                       tau=40.0, pair=(1, 2)), tol=1e-10)
    vals, errs, flags, _ = batch_phase_integrals(
        F, w, 40.0, (1, 2), np.array([3.0]), np.array([-8.0]),
        t_frozen={3: 0.0}, tol=1e-13)
    assert abs(vals[0, 0] - res.value) <= errs[0, 0] + res.abs_error_estimate + 1e-13


def test_problem_validation(quadric_weight):
    F = P("x1^2 + x2^2 - x3^2")
    with pytest.raises(ValueError):
        PhaseProblem(F=F, weight=quadric_weight, t=(0.0, 0.0), tau=1.0, pair=(1, 2))
    with pytest.raises(ValueError):
        PhaseProblem(F=F, weight=quadric_weight, t=(0.0,) * 3, tau=1.0, pair=(1, 1))


def test_oscillation_sanity_tuned_cells(quadric_problem):
    """Stationary cells follow the tau^(-3/2) law once the phase resolves.

    With every axis exponent tuned to the stationary values, the full
    phase has one nondegenerate critical point inside the support, so
    |I| * tau^(3/2) must stay within a modest band; at t = 0 there is no
    critical point and |I| * tau must stay bounded by its trivial value.
    """
    from oscbench.harness import tuned_exponents

    F = quadric_problem.F
    w = quadric_problem.weight
    wint = w.integral()
    taus = np.geomspace(2e3, 2e4, 4)  # past the resolution scale 1/delta0^2
    scaled = []
    for tau in taus:
        ts = tuned_exponents(quadric_problem, float(tau))
        vals, errs, flags, _ = batch_phase_integrals(
            F, w, float(tau), (1, 2), np.array([ts[0]]), np.array([ts[1]]),
            t_frozen={3: float(ts[2])}, tol=max(1e-14, 1e-4 * wint / tau))
        scaled.append(abs(vals[0, 0]) * tau ** 1.5)
    scaled = np.asarray(scaled)
    assert scaled.max() / scaled.min() < 3.0

    for tau in (10.0, 100.0, 1000.0):
        vals, _, _, _ = batch_phase_integrals(
            F, w, float(tau), (1, 2), np.array([0.0]), np.array([0.0]),
            t_frozen={3: 0.0}, tol=1e-13)
        assert abs(vals[0, 0]) * tau <= 10.0 * wint

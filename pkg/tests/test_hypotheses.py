import json

import numpy as np
import pytest

from oscbench.bounds import certified_min_abs
from oscbench.errors import SingularSurfacePointError
from oscbench.hypotheses import (
    ProblemConfig,
    build_weight,
    bump_d1,
    check_declared_dim,
    classify_case,
    find_good_pair,
    find_surface_point,
    hessian_rank_heuristic,
    load_config,
)
from oscbench.polyring import parse_poly, scaled_gradient_det


def P(text, n=None):
    return parse_poly(text, nvars=n)


QUADRIC = P("x1^2 + x2^2 - x3^2")
CROSS = P("x1^2 + x1*x2 + x2^2 - x3^2")


# -- classification -----------------------------------------------------------------


def test_quadric_is_case_two():
    rep = classify_case(QUADRIC, 1, 2, (0.3, 0.4, 0.5), 0.05)
    assert rep.case_label == "CaseII"
    # exact minimum of 16 x1 x2 over the box corners is 16*0.25*0.35 = 1.4
    assert 0 < rep.m0 <= 1.4
    assert rep.m0 > 1.3
    assert rep.m1 > 0 and rep.m2 > 0
    assert rep.rho_min == pytest.approx(0.25)
    assert rep.rho_max == pytest.approx(0.55)


def test_cross_quadric_is_case_one():
    x0 = find_surface_point(CROSS, 3, [0.4, 0.4])
    rep = classify_case(CROSS, 1, 2, x0, 0.05)
    assert rep.case_label == "CaseI"
    assert rep.m2 == pytest.approx(1.0)  # mixed derivative is identically 1
    assert rep.m0 > 0 and rep.m1 > 0


def test_product_form_not_applicable():
    rep = classify_case(P("x1*x2", 2), 1, 2, (0.5, 0.5), 0.1)
    assert rep.case_label == "NotApplicable"
    assert "identically zero" in rep.reason


def test_sign_change_not_certifiable():
    # diagonal factor 9 x1^2 - 3 x2^2 vanishes on x2 = sqrt(3) x1
    F = P("x1^3 - 3*x1*x2^2", 2)
    rep = classify_case(F, 1, 2, (0.3, 0.52), 0.05)
    assert rep.case_label == "NotApplicable"
    assert "diagonal factor" in rep.reason


def test_box_validation():
    with pytest.raises(ValueError):
        classify_case(QUADRIC, 1, 2, (0.3, 0.4, 0.5), -0.1)
    with pytest.raises(ValueError):
        classify_case(QUADRIC, 1, 2, (0.02, 0.4, 0.5), 0.05)
    with pytest.raises(ValueError):
        classify_case(QUADRIC, 1, 1, (0.3, 0.4, 0.5), 0.05)


def test_lambda_is_certified_upper_bound():
    rep = classify_case(QUADRIC, 1, 2, (0.3, 0.4, 0.5), 0.05)
    rng = np.random.default_rng(0)
    pts = rng.uniform(rep.box.lo(), rep.box.hi(), size=(500, 3))
    for j, k in ((1, 1), (2, 2)):
        xk = pts[:, k - 1]
        second = np.array([QUADRIC.derive(k).derive(k).eval(list(p)) for p in pts])
        first = np.array([QUADRIC.derive(k).eval(list(p)) for p in pts])
        lhs = np.abs(xk**2 * second) + np.abs(xk * first)
        assert np.all(lhs <= rep.lam[k - 1] / 2.0 + 1e-12)


def test_monotone_in_delta():
    parent = classify_case(QUADRIC, 1, 2, (0.3, 0.4, 0.5), 0.05)
    child = classify_case(QUADRIC, 1, 2, (0.3, 0.4, 0.5), 0.025)
    assert child.case_label == "CaseI" or child.case_label == "CaseII"
    for attr in ("m0", "m1", "m2"):
        assert getattr(child, attr) >= getattr(parent, attr) * (1 - 1e-12)


def test_m0_below_fine_grid_minimum():
    rep = classify_case(QUADRIC, 1, 2, (0.3, 0.4, 0.5), 0.05, grid_n=33)
    det_form = scaled_gradient_det(QUADRIC, 1, 2)
    fine = certified_min_abs(det_form, rep.box, n=330)
    assert rep.m0 <= fine.grid_value


def test_case_two_checks_symbolic_vanishing():
    # mixed derivative of the quadric vanishes identically, not just numerically
    assert QUADRIC.derive(1).derive(2).is_zero()
    rep = classify_case(QUADRIC, 1, 2, (0.3, 0.4, 0.5), 0.05)
    assert rep.case_label == "CaseII"


# -- pair search --------------------------------------------------------------------


def test_pair_bundle():
    assert find_good_pair(P("x1^2+x2^2+x3^2+x4^2+x5^2")) == (1, 2)
    assert find_good_pair(P("x1*x2*x3 - x4^3")) == (1, 4)
    assert find_good_pair(CROSS) == (1, 2)
    assert find_good_pair(P("x1*x2", 2)) is None


def test_pair_requires_homogeneous_degree():
    with pytest.raises(ValueError):
        find_good_pair(P("x1 + x2^2", 2))
    with pytest.raises(ValueError):
        find_good_pair(P("x1 + x2", 2))


def test_pair_divisibility_is_exact(quadric_problem):
    from oscbench.polyring import divides

    F = quadric_problem.F
    i, j = quadric_problem.pair
    assert divides(F, scaled_gradient_det(F, i, j)) is None


# -- surface points ------------------------------------------------------------------


def test_surface_point_quadric():
    x0 = find_surface_point(QUADRIC, 3, [0.3, 0.4])
    assert np.allclose(x0, [0.3, 0.4, 0.5], atol=1e-9)
    assert abs(QUADRIC.eval([float(v) for v in x0])) < 1e-12


def test_surface_point_positivity_none():
    assert find_surface_point(P("x1^2 + x2^2", 2), 2, [0.5]) is None


def test_surface_point_singular_rejected():
    # (x1 - 1/2)^3 changes sign at a zero-gradient root
    F = P("x1^3 - 3/2*x1^2 + 3/4*x1 - 1/8", 2)
    with pytest.raises(SingularSurfacePointError):
        find_surface_point(F, 1, [0.5])


def test_surface_point_validation():
    with pytest.raises(ValueError):
        find_surface_point(QUADRIC, 4, [0.3, 0.4])
    with pytest.raises(ValueError):
        find_surface_point(QUADRIC, 3, [0.3, 1.5])


# -- weight --------------------------------------------------------------------------


def test_weight_center_and_support():
    w = build_weight((0.3, 0.4, 0.5), 0.04)
    assert w.eval((0.3, 0.4, 0.5)) == pytest.approx(1.0, abs=1e-15)
    assert w.eval((0.34, 0.4, 0.5)) == 0.0
    assert w.eval((0.35, 0.4, 0.5)) == 0.0
    xs = np.linspace(0.2, 0.45, 400)
    vals = w.axis_factor_array(0, xs)
    assert np.all(vals >= 0)
    assert np.all(vals[(xs <= 0.26) | (xs >= 0.34)] == 0.0)


def test_weight_derivative_matches_closed_form():
    w = build_weight((0.3, 0.4, 0.5), 0.04)
    xs = np.linspace(0.3 - 0.04, 0.3 + 0.04, 2001)
    measured = np.array([w.partial(0, (x, 0.4, 0.5)) for x in xs[::50]])
    expected = bump_d1((xs[::50] - 0.3) / 0.04) / 0.04
    assert np.max(np.abs(measured - expected)) < 1e-8


def test_weight_cap_bounds_measured_sums():
    w = build_weight((0.4, 0.6), 0.05)
    rng = np.random.default_rng(1)
    pts = rng.uniform(0.35, 0.45, size=(200, 2))
    pts[:, 1] += 0.2
    sup0 = max(abs(w.eval(p)) for p in pts)
    sup1 = max(max(abs(w.partial(j, p)) for j in range(2)) for p in pts)
    sup2 = max(max(abs(w.second(j, k, p)) for j in range(2) for k in range(j, 2))
               for p in pts)
    assert sup0 + sup1 + sup2 < w.cap


def test_weight_exponent_shift():
    w = build_weight((0.3, 0.4), 0.04, r=(1.5, 0.0))
    x = (0.31, 0.39)
    plain = build_weight((0.3, 0.4), 0.04)
    assert w.eval(x) == pytest.approx(plain.eval(x) * x[0] ** 1.5, rel=1e-12)
    # finite differences agree with the analytic first partial
    h = 1e-7
    fd = (w.eval((x[0] + h, x[1])) - w.eval((x[0] - h, x[1]))) / (2 * h)
    assert w.partial(0, x) == pytest.approx(fd, rel=1e-5)


def test_weight_validation():
    with pytest.raises(ValueError):
        build_weight((0.3, 0.4), -0.1)
    with pytest.raises(ValueError):
        build_weight((0.02, 0.4), 0.05)


# -- declared dimension heuristic ----------------------------------------------------


def test_hessian_rank_heuristic_sphere():
    rng = np.random.default_rng(0)
    assert hessian_rank_heuristic(P("x1^2+x2^2+x3^2+x4^2+x5^2"), rng) == 5


def test_declared_dim_warning():
    rng = np.random.default_rng(0)
    assert check_declared_dim(QUADRIC, 0, rng) is None
    warn = check_declared_dim(QUADRIC, 1, rng)
    assert warn is not None and "heuristic" in warn


# -- config --------------------------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = ProblemConfig(
        name="demo", polynomial="x1^2 + x2^2 - x3^2", dim_v_star=0,
        delta=0.05, delta0=0.04, nvars=3, pair=(1, 2), x0=(0.3, 0.4, 0.5))
    path = tmp_path / "demo.json"
    path.write_text(json.dumps(cfg.to_dict()))
    loaded = load_config(path)
    assert loaded.to_dict() == cfg.to_dict()
    assert loaded.fingerprint() == cfg.fingerprint()


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "x", "polynomial": "x1", "dim_v_star": 0,
                                "delta": 0.1, "delta0": 0.05, "bogus": 1}))
    with pytest.raises(ValueError):
        load_config(path)


def test_config_requires_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "x"}))
    with pytest.raises(ValueError):
        load_config(path)

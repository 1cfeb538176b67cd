import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from filippov_lab.fields import VectorField2
from filippov_lab.integrate import DEFAULT_OPTIONS, MaxTimeExceeded, Section
from filippov_lab.maps import (MapDomainError, asymptotic_model, asymptotic_sections, default_lambda, estimate_alpha,
                               estimate_K, estimate_limit_constants, estimate_S, exterior_map, exterior_map_eps,
                               filippov_return_map, lambda_star, lower_transition_map, return_map_eps,
                               return_map_filippov, section_map, tangent_orbit_height, upper_transition_map)
from filippov_lab.regularize import bump_transition, hermite_transition
from filippov_lab.scenarios import builtin

TIGHT = DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)
CIRCLE = builtin("type_a_circle", b=0.1)
CUBIC = builtin("type_b_cubic")
SYNTH = builtin("synthetic_crossing", v=1.0)


def circle_return(u, b):
    # the angle about (0, 1) advances at unit speed; H/(1 - 2H) decays by exp(-2 pi b) per turn
    H0 = u - u * u / 2
    R = H0 / (1 - 2 * H0) * math.exp(-2 * math.pi * b)
    H1 = R / (1 + 2 * R)
    return 1 - math.sqrt(1 - 2 * H1)


def cubic_return(x):
    # upper arc lands at the root s near 1 of s^2 - s^3 = x^2 - x^3, the lower parabola maps s to 1 - s
    c = x * x - x ** 3
    return 1 - brentq(lambda s: s * s - s ** 3 - c, 2 / 3, 1.0, xtol=1e-15)


# ---- section maps

def test_section_map_parabola():
    m = section_map(VectorField2("1", "x"), Section.vertical(0, 0.01, 0.02), Section.vertical(1))
    assert m(0.01) == pytest.approx(0.51, abs=1e-10)
    assert m.variational_derivative(0.015) == pytest.approx(1.0, abs=1e-9)
    assert m.derivative_at(0.015) == pytest.approx(1.0, abs=1e-8)


def test_section_map_identity():
    s = Section.vertical(0, 0, 1)
    m = section_map(VectorField2("1", "x"), s, s)
    assert all(m(u) == u for u in (0.0, 0.3, 1.0))


def test_hits_outside_target_range_do_not_count():
    m = section_map(VectorField2("1", "x"), Section.vertical(0, 0, 1), Section.vertical(1, 0, 0.2))
    with pytest.raises(MaxTimeExceeded):
        m(0.5)


def test_type_b_exterior_map_decreasing():
    D = exterior_map(CUBIC, eps=1e-2)
    yb = D.meta["y_ref"]
    ok, sign = D.is_monotone(16, 0.5 * yb, 1.5 * yb)
    assert ok and sign == -1


def test_map_csv(tmp_path):
    m = section_map(VectorField2("1", "x"), Section.vertical(0, 0, 1), Section.vertical(1))
    text = m.to_csv([0.1, 0.2], tmp_path / "m.csv")
    lines = text.split("\r\n")
    assert lines[0] == "input,output,derivative"
    assert float(lines[1].split(",")[1]) == pytest.approx(0.6)
    assert (tmp_path / "m.csv").read_bytes().count(b"\r\n") == 3


# ---- Filippov return maps

@pytest.mark.parametrize("u", [0.01, 0.03, 0.08])
@pytest.mark.parametrize("b", [0.1, -0.1])
def test_circle_return_matches_closed_form(u, b):
    scn = builtin("type_a_circle", b=b)
    assert return_map_filippov(scn, u, TIGHT) == pytest.approx(circle_return(u, b), rel=1e-8)


def test_circle_center_case():
    scn = builtin("type_a_circle", b=0.0)
    for u in (0.003, 0.02, 0.07):
        assert abs(return_map_filippov(scn, u) - u) < 1e-8


@pytest.mark.parametrize("u", [0.01, 0.05, 0.15])
def test_cubic_return_matches_closed_form(u):
    assert return_map_filippov(CUBIC, u, TIGHT) == pytest.approx(cubic_return(u), rel=1e-8)


def test_cubic_return_below_diagonal():
    pi = filippov_return_map(CUBIC)
    for u in np.linspace(0.2 / 8, 0.2, 8):
        assert pi(u) < u


def test_return_map_domain():
    for u in (0.0, -0.01, 0.5):
        with pytest.raises(MapDomainError):
            return_map_filippov(CIRCLE, u)


@pytest.mark.parametrize("b", [0.1, -0.1])
def test_estimate_K_circle(b):
    K = estimate_K(builtin("type_a_circle", b=b))
    assert K.value == pytest.approx(math.exp(-2 * math.pi * b), rel=0.02)


def test_estimate_K_cubic():
    assert estimate_K(CUBIC).value == pytest.approx(1.0, rel=0.01)


# ---- exterior maps and S

def test_circle_exterior_unchanged_by_regularization():
    D = exterior_map(CIRCLE)
    De = exterior_map_eps(CIRCLE, hermite_transition(1), 1e-3)
    y = D.meta["y_ref"]
    assert De(y) == D(y)


def test_S_circle_is_zero():
    S = estimate_S(CIRCLE, bump_transition(1, 0.05))
    assert S.value == 0.0 and S.closed_form == 0.0 and S.fd == 0.0


def test_S_synthetic_bump():
    S = estimate_S(SYNTH, bump_transition(1, 0.05))
    assert S.closed_form == pytest.approx(8 * 0.05 / 15, rel=1e-12)
    assert S.fd == pytest.approx(8 * 0.05 / 15, rel=0.05)
    assert S.agree


def test_S_synthetic_hermite():
    S = estimate_S(SYNTH, hermite_transition(1))
    assert S.closed_form == 0.0
    assert abs(S.fd) < 1e-4


def test_S_odd_phi_offset_is_superlinear():
    D = exterior_map(SYNTH, opts=TIGHT)
    d0 = D(0.0)
    gaps = [abs(exterior_map_eps(SYNTH, hermite_transition(1), e, TIGHT)(0.0) - d0) / e for e in (4e-3, 2e-3, 1e-3)]
    assert gaps[-1] < 1e-4


def test_S_type_b_rejected():
    with pytest.raises(ValueError):
        estimate_S(CUBIC, hermite_transition(1))


# ---- asymptotic sections

@pytest.mark.parametrize("k, n", [(1, 1), (2, 3), (1, 3), (3, 5), (2, 8)])
def test_lambda_star(k, n):
    expected = Fraction(n, 1 + 2 * k * (n - 1))
    assert lambda_star(k, n) == pytest.approx(float(expected), rel=1e-15)
    if n >= 2 * k - 1:
        assert 1 / (2 * k) < lambda_star(k, n) <= 1
        assert 1 / (2 * k) < default_lambda(k, n) < lambda_star(k, n)


def test_asymptotic_sections_values():
    a = asymptotic_sections(1, 1, 1.0, 0.6, 0.3, 1e-3, eta=0.5)
    assert a.lambda_star == 1.0
    assert a.x_eps == pytest.approx(0.5e-3)
    assert a.y_hat == pytest.approx(0.045 + 1e-3 - 1e-3 ** 1.2, rel=1e-12)
    assert a.V_hat.range == pytest.approx((1e-3, a.y_hat))
    assert a.H_check.value == -1e-3


@pytest.mark.parametrize("kw", [dict(lam=1.0), dict(lam=0.0), dict(C_beta=0.0), dict(eta=0.0, n=3),
                                dict(n=1, k=2), dict(rho=0.01)])
def test_asymptotic_sections_errors(kw):
    args = dict(k=1, n=1, alpha=1.0, lam=0.6, rho=0.3, eps=1e-3, eta=1.0, C_beta=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        asymptotic_sections(**args)


# ---- alpha and limit constants

@pytest.mark.parametrize("X, k", [(VectorField2("1", "x"), 1), (VectorField2("1", "x^3"), 2),
                                  (VectorField2("1 - y", "x"), 1)])
def test_estimate_alpha(X, k):
    est = estimate_alpha(X, k)
    assert est.value == pytest.approx(1.0, abs=1e-3)
    assert est.exponent == pytest.approx(2 * k, abs=0.05)


def test_estimate_alpha_wrong_k():
    with pytest.raises(ValueError, match="exponent"):
        estimate_alpha(VectorField2("1", "x"), 2)


def test_tangent_exit_height_parabola():
    assert tangent_orbit_height(VectorField2("1", "x"), (0, 0), 0.2) == pytest.approx(0.02, abs=1e-12)
    assert tangent_orbit_height(VectorField2("1", "x"), (0, 0), -0.2) == pytest.approx(0.02, abs=1e-12)


@pytest.mark.slow
def test_limit_constants_circle():
    K = math.exp(-0.2 * math.pi)
    lc = estimate_limit_constants(CIRCLE, K=K)
    assert lc["r_theta_rho"][-1]["r"] == pytest.approx(K, rel=0.03)
    assert lc["monotone_gap"]


@pytest.mark.slow
def test_limit_constants_cubic():
    alpha = estimate_alpha(CUBIC).value
    assert alpha == pytest.approx(2.0, rel=1e-3)       # ybar_x = x^2 - x^3
    lc = estimate_limit_constants(CUBIC, K=1.0, alpha=alpha)
    assert lc["kappa_u"][-1]["kappa_u"] == pytest.approx(-alpha / 2, rel=0.03)
    assert lc["r_theta_eps"][-1]["r"] == pytest.approx(-2 / alpha, rel=0.05)
    assert lc["monotone_gap_kappa_u"] and lc["monotone_gap_r_theta_eps"]


# ---- transition maps and the regularized return map

# The orbit through the section endpoint nearest the fold only grazes the layer
# at eps = 1e-3, so the 9 inputs are the interior nodes of an 11-point grid.

def test_upper_transition_collapse():
    U = upper_transition_map(CIRCLE, hermite_transition(1), 1e-3, rho=0.3, theta=0.2, lam=0.6, opts=TIGHT)
    us = U.grid(11)[1:-1]
    assert U.spread(us) < 1e-9
    yb = tangent_orbit_height(CIRCLE.system.xplus, (0, 0), 0.2, TIGHT)
    assert abs(U(us[0]) - (yb + 1e-3)) < 1e-3 ** (2 * 0.6)


def test_lower_transition_collapse():
    L = lower_transition_map(CUBIC, hermite_transition(1), 1e-3, rho=0.3, theta=0.2, lam=0.6, opts=TIGHT)
    outs = [L(u) for u in L.grid(11)[1:-1]]
    assert max(outs) - min(outs) < 1e-9
    yb = tangent_orbit_height(CUBIC.system.xplus, (0, 0), 0.2, TIGHT)
    assert max(outs) < yb + 1e-3


def test_lower_transition_approaches_tangent_orbit():
    yb = tangent_orbit_height(CUBIC.system.xplus, (0, 0), 0.2, TIGHT)
    gaps = []
    for eps in (4e-3, 2e-3, 1e-3):
        L = lower_transition_map(CUBIC, hermite_transition(1), eps, lam=0.6, opts=TIGHT)
        gaps.append(abs(L(-0.2) - yb))
    assert gaps[0] > gaps[1] > gaps[2]


def test_transition_map_precondition():
    with pytest.raises(ValueError, match="lambda"):
        upper_transition_map(CIRCLE, hermite_transition(1), 1e-3, lam=1.2)


def test_transition_outputs_on_target():
    U = upper_transition_map(CIRCLE, hermite_transition(1), 2e-3, lam=0.6)
    assert U.target.kind == "vertical" and U.target.value == 0.2
    ok, sign = U.is_monotone(9)
    assert ok and sign == 1


def test_regularized_return_map_circle():
    pi = return_map_eps(CIRCLE, hermite_transition(1), 1e-3, lam=0.75)
    lo, hi = pi.domain
    ok, sign = pi.is_monotone(12)
    assert ok and sign == 1
    u = 0.5 * (lo + hi)
    d = pi.variational_derivative(u)
    # the true slope is exponentially small; finite differences only see integration noise
    assert 0 < d < 1e-20
    assert abs(pi.derivative_at(u) - d) < 1e-5


def test_regularized_return_map_cubic_contracts():
    pi = return_map_eps(CUBIC, hermite_transition(1), 1e-3)
    for u in (-0.25, -0.1, 0.02):
        assert pi(u) < u or abs(pi.variational_derivative(u)) < 1


@pytest.mark.slow
@pytest.mark.parametrize("scn", [CIRCLE, CUBIC], ids=["a", "b"])
def test_asymptotic_model_signs(scn):
    model = asymptotic_model(scn, hermite_transition(1))
    assert model.sign_violations(scn.type) == []

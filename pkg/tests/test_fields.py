import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from filippov_lab.fields import (DegenerateSlidingError, FilippovSystem, FlatContactError, NotOnSigmaError,
                                 ScalarField, VectorField2, classify_sigma_point, contact_multiplicity,
                                 lie_derivative, sliding_vector, sliding_weight)

H_Y = ScalarField("y")
CUBIC = FilippovSystem(VectorField2("1", "2*x - 3*x^2"), VectorField2("-1", "1 - 2*x"), H_Y)


@pytest.mark.parametrize("f1, f2, orders, expected", [
    ("1", "x", [1, 2], [0.0, 1.0]),
    ("1", "x^3", [1, 2, 3, 4], [0.0, 0.0, 0.0, 6.0]),
    ("1 - y", "x", [2], [1.0]),
])
def test_lie_derivative_examples(f1, f2, orders, expected):
    X = VectorField2(f1, f2)
    got = [lie_derivative(X, H_Y, (0, 0), o) for o in orders]
    assert got == pytest.approx(expected, abs=1e-15)


def test_lie_order_above_max_is_rejected():
    with pytest.raises(ValueError):
        lie_derivative(VectorField2("1", "x"), H_Y, (0, 0), 9)


@pytest.mark.parametrize("X, p, side, expected", [
    (VectorField2("1", "x"), (0, 0), "+", (2, True)),
    (VectorField2("1", "x^3"), (0, 0), "+", (4, True)),
    (VectorField2("-1", "1 - 2*x"), (0.5, 0), "-", (2, False)),
    (VectorField2("1", "-x"), (0, 0), "+", (2, False)),
    (VectorField2("1", "x^2"), (0, 0), "+", (3, None)),
])
def test_contact_multiplicity(X, p, side, expected):
    assert contact_multiplicity(X, H_Y, p, side) == expected


def test_flat_contact_is_an_error():
    with pytest.raises(FlatContactError):
        contact_multiplicity(VectorField2("1", "0"), H_Y, (0, 0))


def test_contact_off_sigma_is_an_error():
    with pytest.raises(NotOnSigmaError):
        contact_multiplicity(VectorField2("1", "x"), H_Y, (0, 0.1))


@pytest.mark.parametrize("p, kind", [((1, 0), "crossing"), ((0.6, 0), "sliding"), ((0, 0), "tangency")])
def test_classify_cubic(p, kind):
    c = classify_sigma_point(CUBIC, p)
    assert c.kind == kind
    if p == (1, 0):
        assert (c.lie_plus, c.lie_minus) == pytest.approx((-1, -1))
    if kind == "tangency":
        assert (c.side, c.multiplicity, c.visible) == ("+", 2, True)


def test_sliding_attracting_flag():
    c = classify_sigma_point(CUBIC, (0.6, 0))
    assert c.attracting is False      # X+ points up, X- points down: repelling
    Z = FilippovSystem(VectorField2("1", "-1"), VectorField2("0", "1"), H_Y)
    assert classify_sigma_point(Z, (0, 0)).attracting is True


@pytest.mark.parametrize("Z, p, expected", [
    (FilippovSystem(VectorField2("1", "-1"), VectorField2("0", "1"), H_Y), (0, 0), (0.5, 0)),
    (CUBIC, (0.6, 0), (0.25, 0)),
    (FilippovSystem(VectorField2("1", "-1"), VectorField2("1", "1"), H_Y), (0.3, 0), (1, 0)),
])
def test_sliding_vector_examples(Z, p, expected):
    assert sliding_vector(Z, p) == pytest.approx(expected, abs=1e-15)


def test_sliding_vector_requires_sliding_point():
    with pytest.raises(ValueError):
        sliding_vector(CUBIC, (1, 0))


def test_degenerate_sliding():
    # X+h = -1e-12 and X-h = 1e-12 would make X-h - X+h underflow the tolerance
    Z = FilippovSystem(VectorField2("1", "-1e-12"), VectorField2("1", "1e-12"), H_Y)
    with pytest.raises((DegenerateSlidingError, ValueError)):
        sliding_vector(Z, (0, 0))


# ---- properties on random polynomial systems with curved switching lines

coef = st.floats(-2, 2, allow_nan=False)


def _poly(c):
    return f"({c[0]!r}) + ({c[1]!r})*x + ({c[2]!r})*y + ({c[3]!r})*x*y + ({c[4]!r})*x^2"


@st.composite
def systems(draw):
    cs = [draw(st.lists(coef, min_size=5, max_size=5)) for _ in range(4)]
    a = draw(st.floats(-0.5, 0.5))
    h = ScalarField(f"y - ({a!r})*x^2")
    return FilippovSystem(VectorField2(_poly(cs[0]), _poly(cs[1])), VectorField2(_poly(cs[2]), _poly(cs[3])), h), a


@settings(max_examples=80, deadline=None)
@given(systems(), st.floats(-1, 1))
def test_sliding_vector_is_tangent_and_convex(sys_a, x):
    Z, a = sys_a
    p = (x, a * x * x)
    try:
        c = classify_sigma_point(Z, p)
    except FlatContactError:
        return
    if c.kind != "sliding" or abs(c.lie_minus - c.lie_plus) < 1e-6:
        return
    zs = sliding_vector(Z, p)
    gx, gy = Z.h.grad_fn(*p)
    assert abs(gx * zs[0] + gy * zs[1]) <= 1e-12 * (1 + np.hypot(*zs))
    lam = sliding_weight(c.lie_plus, c.lie_minus)
    assert 0 < lam < 1
    xp, xm = Z.xplus(*p), Z.xminus(*p)
    combo = (lam * xp[0] + (1 - lam) * xm[0], lam * xp[1] + (1 - lam) * xm[1])
    assert zs == pytest.approx(combo, rel=1e-12, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(systems(), st.floats(-1, 1))
def test_classification_trichotomy(sys_a, x):
    Z, a = sys_a
    p = (x, a * x * x)
    try:
        c = classify_sigma_point(Z, p)
    except FlatContactError:
        return
    prod = c.lie_plus * c.lie_minus
    assert c.kind in ("crossing", "sliding", "tangency")
    assert (c.kind == "crossing") == (prod > 0 and min(abs(c.lie_plus), abs(c.lie_minus)) > 1e-9)
    assert (c.kind == "sliding") == (prod < 0 and min(abs(c.lie_plus), abs(c.lie_minus)) > 1e-9)

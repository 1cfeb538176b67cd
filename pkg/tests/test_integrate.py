import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from filippov_lab.fields import FilippovSystem, ScalarField, VectorField2
from filippov_lab.integrate import (DEFAULT_OPTIONS, IntegratorOptions, MaxTimeExceeded, Section, WindowEscape,
                                    filippov_trajectory, flow_for_time, flow_to_section, flow_with_variation)
from filippov_lab.regularize import hermite_transition, regularized_field

H_Y = ScalarField("y")
TAU = DEFAULT_OPTIONS.event_tol


def test_parabola_to_vertical_section():
    p, t, traj = flow_to_section(VectorField2("1", "x"), (-1, 0.5), Section.vertical(1))
    assert p == pytest.approx((1, 0.5), abs=1e-9)
    assert t == pytest.approx(2, abs=1e-9)
    assert abs(p[0] - 1) <= TAU
    assert traj.events_of("section-hit")


def test_parabola_to_horizontal_section_increasing():
    target = Section.horizontal(0.02, 0, math.inf, "increasing")
    p, _, _ = flow_to_section(VectorField2("1", "x"), (0, 0), target)
    assert p == pytest.approx((0.2, 0.02), abs=1e-10)


def test_vertical_unit_flow():
    p, t, _ = flow_to_section(VectorField2("0", "1"), (0, -0.01), Section.horizontal(0))
    assert p == pytest.approx((0, 0), abs=1e-14)
    assert t == pytest.approx(0.01, abs=1e-12)


def test_direction_filter_skips_wrong_crossings():
    # y = x^2/2 - 0.5 crosses y = 0 decreasing at x = -1 and increasing at x = 1
    p, _, _ = flow_to_section(VectorField2("1", "x"), (-2, 1.5), Section.horizontal(0, direction="increasing"))
    assert p[0] == pytest.approx(1, abs=1e-9)


def test_unreachable_section_raises():
    with pytest.raises(MaxTimeExceeded):
        flow_to_section(VectorField2("1", "0"), (0, 0), Section.horizontal(1), max_time=5)


def test_options_must_be_positive():
    with pytest.raises(ValueError):
        IntegratorOptions(rel_tol=0)
    with pytest.raises(ValueError):
        Section.vertical(0, 1, 1)


def test_identical_fields_cross_once():
    X = VectorField2("1", "-1")
    traj = filippov_trajectory(FilippovSystem(X, X, H_Y), (-1, 0.5), 1.0)
    crosses = traj.events_of("sigma-cross")
    assert len(crosses) == 1
    assert crosses[0].p == pytest.approx((-0.5, 0), abs=1e-10)
    assert traj.end == pytest.approx((0, -0.5), abs=1e-9)


def test_arc_then_sliding():
    Z = FilippovSystem(VectorField2("1", "-1"), VectorField2("0", "1"), H_Y)
    traj = filippov_trajectory(Z, (-1, 0.5), 1.5)
    entry = traj.events_of("sliding-entry")
    assert entry and entry[0].p == pytest.approx((-0.5, 0), abs=1e-10)
    sliding = [s for s in traj.segments if s.regime == "sliding"][0]
    (t0, p0), (t1, p1) = (sliding.t[0], sliding.points[0]), (sliding.t[-1], sliding.points[-1])
    assert (p1[0] - p0[0]) / (t1 - t0) == pytest.approx(0.5, rel=1e-9)
    assert max(abs(p[1]) for p in sliding.points) <= TAU


def test_cubic_crossing_near_one():
    Z = FilippovSystem(VectorField2("1", "2*x - 3*x^2"), VectorField2("-1", "1 - 2*x"), H_Y)
    traj = filippov_trajectory(Z, (0.1, 0), 1.0)
    cross = traj.events_of("sigma-cross")
    x_star = brentq(lambda x: x * x - x ** 3 - 0.009, 0.5, 1.0)
    assert cross and cross[0].p[0] == pytest.approx(x_star, abs=1e-9)
    assert not traj.events_of("sliding-entry")
    # Filippov consistency at the crossing: both sides push downward
    x = cross[0].p[0]
    assert (2 * x - 3 * x * x) * (1 - 2 * x) > 0


def test_window_escape():
    Z = FilippovSystem(VectorField2("1", "0"), VectorField2("1", "0"), H_Y)
    with pytest.raises(WindowEscape):
        filippov_trajectory(Z, (0, 0.5), 10, window=(-1, 1, -1, 1))


def test_zero_time_is_single_sample():
    Z = FilippovSystem(VectorField2("1", "0"), VectorField2("1", "0"), H_Y)
    traj = filippov_trajectory(Z, (0.3, 0.5), 0.0)
    assert traj.samples() == [(0.0, 0.3, 0.5, "+")]


def test_band_step_cap_is_respected():
    R = regularized_field(FilippovSystem(VectorField2("1", "-1"), VectorField2("1", "1"), H_Y),
                          hermite_transition(1), 1e-3)
    traj = flow_for_time(R, (0, 0.5), 1.0)
    pts, t = traj.points(), traj.times()
    inside = np.abs(pts[:-1, 1]) <= 1e-3
    assert np.all(np.diff(t)[inside] <= 0.5e-3 + 1e-15)


def test_variational_derivative_matches_finite_difference():
    X = VectorField2("1 - y", "x")
    target = Section.vertical(0.5)
    _, _, _, du = flow_with_variation(X, (-0.5, 0.3), (0, 1), target)
    h = 1e-6
    up = flow_to_section(X, (-0.5, 0.3 + h), target)[0][1]
    dn = flow_to_section(X, (-0.5, 0.3 - h), target)[0][1]
    assert du == pytest.approx((up - dn) / (2 * h), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.4, 0.4))
def test_conservation_of_first_integral(x0, y0):
    X = VectorField2("1 - y", "x")
    H = lambda x, y: y - y * y / 2 - x * x / 2
    traj = flow_for_time(X, (x0, y0), 5.0)
    vals = [H(x, y) for x, y in traj.points()]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.4, 0.4), st.floats(0.2, 3.0))
def test_reversibility(x0, y0, T):
    fwd = flow_for_time(VectorField2("1 - y", "x"), (x0, y0), T).end
    back = flow_for_time(VectorField2("y - 1", "-x"), fwd, T).end
    assert math.hypot(back[0] - x0, back[1] - y0) <= 1e-7


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, -0.1), st.floats(0.1, 0.9))
def test_event_residual_and_monotone_time(y0, c):
    X = VectorField2("1 - y", "x")
    p, _, traj = flow_to_section(X, (-0.8, y0 * 0.3), Section.vertical(c * 0.5))
    assert abs(p[0] - c * 0.5) <= TAU
    assert np.all(np.diff(traj.times()) > 0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.5, -0.05), st.floats(0.05, 0.8))
def test_sigma_cross_events_on_sigma(x0, y0):
    Z = FilippovSystem(VectorField2("1", "2*x - 3*x^2"), VectorField2("-1", "1 - 2*x"), H_Y)
    try:
        traj = filippov_trajectory(Z, (x0, y0), 3.0, window=(-3, 3, -3, 3))
    except WindowEscape:
        return
    for e in traj.events_of("sigma-cross"):
        assert abs(e.p[1]) <= TAU
    assert np.all(np.diff(traj.times()) > 0)

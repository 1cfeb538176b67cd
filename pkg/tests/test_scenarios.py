import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from filippov_lab.fields import contact_multiplicity
from filippov_lab.integrate import DEFAULT_OPTIONS, Section, flow_to_section
from filippov_lab.scenarios import (BUILTINS, ScenarioError, ScenarioValidationError, builtin, builtin_dict,
                                    fixture_path, gamma_points, load_scenario, negate_scenario,
                                    scenario_from_dict, validate_scenario)

TIGHT = DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_validate_cleanly(name):
    rep = validate_scenario(builtin(name, validate=False))
    assert rep.ok, rep.diagnostics


@pytest.mark.parametrize("b", [0.1, 0.0, -0.1])
def test_circle_closes(b):
    rep = validate_scenario(builtin("type_a_circle", b=b))
    assert rep.info["closure_residual"] < 1e-8


def test_cubic_has_one_crossing():
    scn = builtin("type_b_cubic")
    assert scn.polycycle.m == 1
    rep = validate_scenario(scn)
    assert len(rep.info["crossings_found"]) == 1


def test_circle_invariant_is_preserved():
    # dH/dt = -b H (x^2 + (y-1)^2) vanishes on H = 0
    scn = builtin("type_a_circle", b=0.1)
    for th in np.linspace(0, 2 * math.pi, 17):
        x, y = math.sin(th), 1 - math.cos(th)
        fx, fy = scn.system.xplus(x, y)
        assert abs(-x * fx + (1 - y) * fy) < 1e-14


def test_fold_k2_contact():
    scn = builtin("fold_k2_variant")
    assert contact_multiplicity(scn.system.xplus, scn.system.h, (0, 0), "+") == (4, True)


def test_cubic_lower_orbit():
    scn = builtin("type_b_cubic")
    p, t, _ = flow_to_section(scn.system.xminus, (1, 0), Section.vertical(0), TIGHT)
    assert p == pytest.approx((0, 0), abs=1e-12)
    assert t == pytest.approx(1, abs=1e-12)
    assert scn.system.xminus(*p) == pytest.approx((-1, 1))


def test_cubic_upper_arc_is_the_graph():
    scn = builtin("type_b_cubic")
    _, _, traj = flow_to_section(scn.system.xplus, (0, 0), Section.vertical(1), TIGHT)
    assert max(abs(y - x * x + x ** 3) for x, y in traj.points()) < 1e-8


@pytest.mark.parametrize("name, params", [("type_a_circle", {"b": 0.5}), ("fold_k2_variant", {"b": -0.7}),
                                          ("nope", {}), ("type_b_cubic", {"b": 1})])
def test_builtin_errors(name, params):
    with pytest.raises(ScenarioError):
        builtin(name, **params)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_fixture_round_trip(name):
    assert load_scenario(fixture_path(name)) == builtin(name)


def test_to_json_round_trip(tmp_path):
    scn = builtin("type_a_circle", b=0.2)
    path = tmp_path / "c.json"
    path.write_text(scn.to_json(), encoding="utf-8")
    assert load_scenario(path) == scn


def test_missing_tangency_is_reported():
    d = builtin_dict("type_b_cubic")
    d["xplus"]["f2"] = "1 + 2*x - 3*x^2"
    with pytest.raises(ScenarioValidationError, match="contact_multiplicity mismatch"):
        scenario_from_dict(d)


def test_crossing_in_sliding_region_is_named():
    d = builtin_dict("type_b_cubic")
    d["polycycle"]["crossings"] = [[0.6, 0.0]]
    with pytest.raises(ScenarioValidationError) as info:
        scenario_from_dict(d)
    assert any("q_1" in str(x) and "sliding" in str(x) for x in info.value.diagnostics)


def test_a3_failure_and_reduction():
    d = builtin_dict("type_a_circle", b=-0.1)
    d["xminus"]["f2"] = "-1"
    with pytest.raises(ScenarioValidationError) as info:
        scenario_from_dict(d)
    diag = [x for x in info.value.diagnostics if x.label == "(a.3)"]
    assert diag and "X-h(p)>0" in diag[0].message and "-Z" in diag[0].hint
    flipped = negate_scenario(scenario_from_dict(d, validate=False), validate=True)
    assert validate_scenario(flipped).ok
    # -Z of the b = -0.1 circle with reversed lower field is the b = +0.1 builtin
    ref = builtin("type_a_circle", b=0.1).system
    for x, y in [(0.3, 0.2), (-0.7, 1.4), (0.1, -0.2)]:
        assert flipped.system.xplus(x, y) == pytest.approx(ref.xplus(x, y), abs=1e-15)
        assert flipped.system.xminus(x, y) == pytest.approx(ref.xminus(x, y), abs=1e-15)


def test_bad_json_reports_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x",\n  "h": }', encoding="utf-8")
    with pytest.raises(ScenarioError, match="line 2"):
        load_scenario(path)


def test_bad_expression_reports_offset():
    d = builtin_dict("type_b_cubic")
    d["xminus"]["f1"] = "-1 +* x"
    with pytest.raises(ScenarioError, match="offset"):
        scenario_from_dict(d)


def test_fixture_files_are_plain_json():
    for name in BUILTINS:
        d = json.loads(fixture_path(name).read_text(encoding="utf-8"))
        assert d["name"] == name


def test_gamma_points_close_up():
    for name in ("type_a_circle", "type_b_cubic", "fold_k2_variant"):
        pts = gamma_points(builtin(name))
        assert np.hypot(*(pts[0] - pts[-1])) < 1e-6


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.45, 0.45))
def test_circle_family_validates(b):
    assert validate_scenario(builtin("type_a_circle", validate=False, b=b)).ok

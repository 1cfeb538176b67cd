"""Built-in polycycle scenarios, JSON scenario files and hypothesis checks.

A scenario is a Filippov system together with a description of the
polycycle Γ it carries: its type (``'a'``: both tangential separatrices above
Σ, ``'b'``: one arrives transversally from below), the tangency point ``p``
with contact multiplicity ``2k``, the crossing points ``q_i`` and a reference
description of Γ used for distance measurements.

File format (JSON)::

    {
      "name": "type_b_cubic",
      "xplus":  {"f1": "1",  "f2": "2*x - 3*x^2"},
      "xminus": {"f1": "-1", "f2": "1 - 2*x"},
      "h": "y",
      "window": [-0.5, 1.5, -0.5, 0.5],
      "polycycle": {"type": "b", "p": [0, 0], "k": 1, "crossings": [[1, 0]],
                    "gamma": {"kind": "graphs", "upper": "x^2 - x^3",
                              "lower": "x^2 - x", "x_range": [0, 1]},
                    "rho": 0.3, "theta": 0.2, "eta": 0.2},
      "transition": {"family": "hermite", "n": 1, "c": 0.0},
      "prepared_at_crossings": false
    }

``gamma.kind`` is one of ``circle`` (``center``, ``radius``), ``graphs``
(upper and lower graphs over ``x_range``), ``orbit`` (the X+ orbit of ``p``,
optionally with an ``invariant`` expression vanishing on it) or ``polyline``
(``points``, for open arcs).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Tuple

import numpy as np

from .expr import ExprSyntaxError, compile_expr, eval_expr, parse_expr, subst_expr
from .fields import (DEFAULT_TOL, FilippovSystem, FlatContactError, ScalarField, Tolerances,
                     VectorField2, classify_sigma_point, contact_multiplicity)
from .geometry import circle_points, points_to_polyline
from .integrate import (DEFAULT_OPTIONS, IntegrationError, IntegratorOptions, Section,
                        filippov_trajectory, flow_to_section)

__all__ = [
    "PolycycleSpec", "Scenario", "Diagnostic", "ValidationReport", "ScenarioError",
    "ScenarioValidationError", "builtin", "builtin_dict", "BUILTINS", "load_scenario", "scenario_from_dict",
    "validate_scenario", "negate_scenario", "gamma_points", "fixture_path",
]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    label: str
    message: str
    hint: str = ""

    def __str__(self):
        s = f"{self.label} {self.message}"
        return f"{s} ({self.hint})" if self.hint else s


class ScenarioValidationError(ScenarioError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("scenario validation failed:\n" + "\n".join(f"  - {d}" for d in self.diagnostics))


@dataclass
class ValidationReport:
    diagnostics: List[Diagnostic] = field(default_factory=list)
    info: Dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def add(self, label, message, hint=""):
        self.diagnostics.append(Diagnostic(label, message, hint))


def _freeze(obj):
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(v) for v in obj)
    return obj


def _thaw(obj):
    if isinstance(obj, tuple) and obj and all(isinstance(i, tuple) and len(i) == 2 and isinstance(i[0], str)
                                              for i in obj):
        return {k: _thaw(v) for k, v in obj}
    if isinstance(obj, tuple):
        return [_thaw(v) for v in obj]
    return obj


@dataclass(frozen=True)
class PolycycleSpec:
    type: str                                   # 'a', 'b' or 'arc'
    p: Tuple[float, float]
    k: int
    crossings: Tuple[Tuple[float, float], ...] = ()
    gamma: tuple = ()                           # frozen descriptor; see gamma_dict
    rho: float = 0.3
    theta: float = 0.2
    eta: float = 0.1

    @property
    def m(self) -> int:
        return len(self.crossings)

    @property
    def gamma_dict(self) -> dict:
        return _thaw(self.gamma)

    @property
    def return_section(self) -> Section:
        px, py = self.p
        if self.type == "b":
            return Section.horizontal(py, px, px + self.eta, "increasing")
        return Section.vertical(px, py, py + self.eta, "increasing")

    def to_dict(self):
        return {"type": self.type, "p": list(self.p), "k": self.k,
                "crossings": [list(q) for q in self.crossings], "gamma": self.gamma_dict,
                "rho": self.rho, "theta": self.theta, "eta": self.eta}


@dataclass(frozen=True)
class Scenario:
    name: str
    system: FilippovSystem
    polycycle: PolycycleSpec
    window: Tuple[float, float, float, float]
    prepared_at_crossings: bool = False
    transition: tuple = (("c", 0.0), ("family", "hermite"), ("n", 1))
    params: tuple = ()
    notes: str = field(default="", compare=False)
    sources: tuple = field(default=(), compare=False)   # original expression strings

    @property
    def type(self) -> str:
        return self.polycycle.type

    @property
    def k(self) -> int:
        return self.polycycle.k

    @property
    def transition_spec(self) -> dict:
        return _thaw(self.transition)

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def in_window(self, p, slack: float = 0.0) -> bool:
        x0, x1, y0, y1 = self.window
        return x0 - slack <= p[0] <= x1 + slack and y0 - slack <= p[1] <= y1 + slack

    def to_dict(self) -> dict:
        src = dict(self.sources) if self.sources else {
            "xplus.f1": str(self.system.xplus.f1), "xplus.f2": str(self.system.xplus.f2),
            "xminus.f1": str(self.system.xminus.f1), "xminus.f2": str(self.system.xminus.f2),
            "h": str(self.system.h.expr)}
        return {
            "name": self.name,
            "params": self.param_dict,
            "xplus": {"f1": src["xplus.f1"], "f2": src["xplus.f2"]},
            "xminus": {"f1": src["xminus.f1"], "f2": src["xminus.f2"]},
            "h": src["h"],
            "window": list(self.window),
            "polycycle": self.polycycle.to_dict(),
            "transition": self.transition_spec,
            "prepared_at_crossings": self.prepared_at_crossings,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------- construction

def _parse_field(d: dict, key: str):
    try:
        return parse_expr(str(d[key]))
    except KeyError:
        raise ScenarioError(f"missing field {key!r}") from None


def scenario_from_dict(d: dict, validate: bool = True, tol: Tolerances = DEFAULT_TOL) -> Scenario:
    """Build (and by default validate) a scenario from its JSON dictionary."""
    sources = {}
    exprs = {}
    for path in ("xplus.f1", "xplus.f2", "xminus.f1", "xminus.f2", "h"):
        node = d
        try:
            for part in path.split("."):
                node = node[part]
        except (KeyError, TypeError):
            raise ScenarioError(f"missing field {path!r}") from None
        try:
            exprs[path] = parse_expr(str(node))
        except ExprSyntaxError as exc:
            raise ScenarioError(f"{path}: {exc} (offset {exc.offset})") from exc
        sources[path] = str(node)
    pc = d.get("polycycle")
    if not isinstance(pc, dict):
        raise ScenarioError("missing field 'polycycle'")
    ptype = pc.get("type")
    if ptype not in ("a", "b", "arc"):
        raise ScenarioError(f"polycycle.type must be 'a', 'b' or 'arc', got {ptype!r}")
    try:
        spec = PolycycleSpec(
            type=ptype, p=tuple(float(v) for v in pc["p"]), k=int(pc.get("k", 1)),
            crossings=tuple(tuple(float(v) for v in q) for q in pc.get("crossings", [])),
            gamma=_freeze(pc.get("gamma", {})), rho=float(pc.get("rho", 0.3)),
            theta=float(pc.get("theta", 0.2)), eta=float(pc.get("eta", 0.1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad polycycle description: {exc}") from exc
    system = FilippovSystem(VectorField2(exprs["xplus.f1"], exprs["xplus.f2"]),
                            VectorField2(exprs["xminus.f1"], exprs["xminus.f2"]),
                            ScalarField(exprs["h"]))
    window = tuple(float(v) for v in d.get("window", (-2, 2, -2, 2)))
    if len(window) != 4 or not (window[1] > window[0] and window[3] > window[2]):
        raise ScenarioError("window must be [xmin, xmax, ymin, ymax] with positive extent")
    tr = d.get("transition", {"family": "hermite", "n": 1, "c": 0.0})
    tr = {"family": tr.get("family", "hermite"), "n": int(tr.get("n", 1)), "c": float(tr.get("c", 0.0))}
    scn = Scenario(name=str(d.get("name", "scenario")), system=system, polycycle=spec, window=window,
                   prepared_at_crossings=bool(d.get("prepared_at_crossings", False)),
                   transition=_freeze(tr), params=tuple(sorted(d.get("params", {}).items())),
                   notes=str(d.get("notes", "")), sources=tuple(sorted(sources.items())))
    if validate:
        rep = validate_scenario(scn, tol)
        if not rep.ok:
            raise ScenarioValidationError(rep.diagnostics)
    return scn


def load_scenario(path, validate: bool = True, tol: Tolerances = DEFAULT_TOL) -> Scenario:
    """Read a scenario JSON file; validation runs automatically."""
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: JSON error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(d, validate, tol)


def _num(v: float) -> str:
    return repr(float(v))


def _type_a_circle(b: float = 0.1) -> dict:
    if not abs(b) < 0.5:
        raise ScenarioError("type_a_circle requires |b| < 0.5")
    H = "(y - y^2/2 - x^2/2)"
    return {
        "name": "type_a_circle", "params": {"b": float(b)},
        "xplus": {"f1": f"1 - y + {_num(b)}*{H}*x", "f2": f"x + {_num(b)}*{H}*(y - 1)"},
        "xminus": {"f1": "0", "f2": "1"}, "h": "y",
        "window": [-1.5, 1.5, -0.5, 2.5],
        "polycycle": {"type": "a", "p": [0.0, 0.0], "k": 1, "crossings": [],
                      "gamma": {"kind": "circle", "center": [0.0, 1.0], "radius": 1.0},
                      "rho": 0.3, "theta": 0.2, "eta": 0.1},
        "transition": {"family": "hermite", "n": 1, "c": 0.0},
        "prepared_at_crossings": False,
        "notes": "Rotation about (0, 1) perturbed along grad H; H = 0 (the unit circle) is invariant "
                 "because dH/dt = -b H (x^2 + (y-1)^2). Return-map slope K = exp(-2 pi b).",
    }


def _type_b_cubic() -> dict:
    return {
        "name": "type_b_cubic", "params": {},
        "xplus": {"f1": "1", "f2": "2*x - 3*x^2"},
        "xminus": {"f1": "-1", "f2": "1 - 2*x"}, "h": "y",
        "window": [-0.5, 1.5, -0.5, 0.5],
        "polycycle": {"type": "b", "p": [0.0, 0.0], "k": 1, "crossings": [[1.0, 0.0]],
                      "gamma": {"kind": "graphs", "upper": "x^2 - x^3", "lower": "x^2 - x",
                                "x_range": [0.0, 1.0]},
                      "rho": 0.3, "theta": 0.2, "eta": 0.2},
        "transition": {"family": "hermite", "n": 1, "c": 0.0},
        "prepared_at_crossings": False,
        "notes": "Upper arc y = x^2 - x^3 of X+, lower arc y = x^2 - x of X-, crossing at (1, 0).",
    }


def _fold_k2_variant(b: float = 0.1) -> dict:
    if not abs(b) < 0.5:
        raise ScenarioError("fold_k2_variant requires |b| < 0.5")
    G = "(y - y^2/2 - x^4/4)"
    return {
        "name": "fold_k2_variant", "params": {"b": float(b)},
        "xplus": {"f1": f"1 - y + {_num(b)}*{G}*x^3", "f2": f"x^3 - {_num(b)}*{G}*(1 - y)"},
        "xminus": {"f1": "0", "f2": "1"}, "h": "y",
        "window": [-1.5, 1.5, -0.5, 2.5],
        "polycycle": {"type": "a", "p": [0.0, 0.0], "k": 2, "crossings": [],
                      "gamma": {"kind": "orbit", "invariant": "y - y^2/2 - x^4/4"},
                      "rho": 0.5, "theta": 0.4, "eta": 0.1},
        "transition": {"family": "hermite", "n": 3, "c": 0.0},
        "prepared_at_crossings": False,
        "notes": "Hamiltonian-like field (1 - y, x^3) of G = y - y^2/2 - x^4/4, perturbed by b G times "
                 "the gradient direction so that dG/dt = -b G (x^6 + (1-y)^2). The closed curve G = 0 "
                 "stays invariant and touches y = 0 at the origin with a fourth-order contact.",
    }


def _synthetic_crossing(v: float = 1.0) -> dict:
    rho, theta = 0.5, 0.5
    return {
        "name": "synthetic_crossing", "params": {"v": float(v)},
        "xplus": {"f1": "1", "f2": _num(v)},
        "xminus": {"f1": "1", "f2": "0"}, "h": "x",
        "window": [-1.0, 1.0, -1.0, 1.0],
        "polycycle": {"type": "arc", "p": [-rho, 0.0], "k": 1, "crossings": [[0.0, 0.0]],
                      "gamma": {"kind": "polyline", "points": [[-rho, 0.0], [0.0, 0.0], [theta, v * theta]]},
                      "rho": rho, "theta": theta, "eta": 0.1},
        "transition": {"family": "hermite", "n": 1, "c": 0.0},
        "prepared_at_crossings": True,
        "notes": "Single transversal crossing of {x = 0} in prepared coordinates: upper field (1, v), "
                 "lower field horizontal. Exterior arc from {x = -rho} to {x = theta}.",
    }


BUILTINS = {
    "type_a_circle": _type_a_circle,
    "type_b_cubic": _type_b_cubic,
    "fold_k2_variant": _fold_k2_variant,
    "synthetic_crossing": _synthetic_crossing,
}


def builtin_dict(name: str, **params) -> dict:
    if name not in BUILTINS:
        raise ScenarioError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}")
    try:
        return BUILTINS[name](**params)
    except TypeError as exc:
        raise ScenarioError(f"bad parameters for {name}: {exc}") from exc


def builtin(name: str, validate: bool = True, **params) -> Scenario:
    """Instantiate a built-in scenario (validated by default)."""
    return scenario_from_dict(builtin_dict(name, **params), validate=validate)


def fixture_path(name: str):
    """Path of the shipped JSON file for a builtin."""
    return resources.files("filippov_lab") / "fixtures" / f"{name}.json"


# --------------------------------------------------------------------------- Γ reference

_GAMMA_CACHE: Dict[tuple, np.ndarray] = {}


def gamma_points(scn: Scenario, n: int = 20000, opts: Optional[IntegratorOptions] = None) -> np.ndarray:
    """Dense samples of the reference curve Γ (closed for types a and b)."""
    g = scn.polycycle.gamma_dict
    kind = g.get("kind")
    key = (scn.system, scn.polycycle, n)
    if key in _GAMMA_CACHE:
        return _GAMMA_CACHE[key]
    if kind == "circle":
        pts = circle_points(g["center"], float(g["radius"]), n)
    elif kind == "graphs":
        up, lo = compile_expr(parse_expr(g["upper"])), compile_expr(parse_expr(g["lower"]))
        x0, x1 = g["x_range"]
        xs = np.linspace(x0, x1, n // 2 + 1)
        upper = [(x, up(x, 0.0)) for x in xs]
        lower = [(x, lo(x, 0.0)) for x in xs[::-1]]
        pts = np.array(upper + lower[1:])
    elif kind == "orbit":
        o = opts or DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)
        px, py = scn.polycycle.p
        stop = Section.vertical(px, py - 1e-3, py + 1e-3, "increasing")
        _, _, traj = flow_to_section(scn.system.xplus, (px, py), stop, o)
        pts = traj.dense_points(2e-4)
    elif kind == "polyline":
        pts = np.asarray(g["points"], float)
    else:
        raise ScenarioError(f"unknown gamma kind {kind!r}")
    _GAMMA_CACHE[key] = pts
    return pts


def _gamma_residual(scn: Scenario, q) -> float:
    """Distance from ``q`` to Γ using the closed form where available."""
    g = scn.polycycle.gamma_dict
    kind = g.get("kind")
    if kind == "circle":
        c, r = g["center"], float(g["radius"])
        return abs(math.hypot(q[0] - c[0], q[1] - c[1]) - r)
    if kind == "graphs":
        x0, x1 = g["x_range"]
        if not x0 - 1e-12 <= q[0] <= x1 + 1e-12:
            return math.inf
        return min(abs(q[1] - eval_expr(parse_expr(g[s]), (q[0], 0.0))) for s in ("upper", "lower"))
    if kind == "orbit" and "invariant" in g:
        return abs(eval_expr(parse_expr(g["invariant"]), q))
    return float(points_to_polyline([q], gamma_points(scn))[0])


# --------------------------------------------------------------------------- validation

def validate_scenario(scn: Scenario, tol: Tolerances = DEFAULT_TOL,
                      opts: Optional[IntegratorOptions] = None) -> ValidationReport:
    """Check the hypotheses of the scenario's polycycle type, in order.

    Every failure is itemised with the hypothesis it violates; the closure
    check only runs when the pointwise hypotheses hold.
    """
    rep = ValidationReport()
    Z, pc = scn.system, scn.polycycle
    t = pc.type
    p = pc.p
    opts = opts or DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)
    if abs(Z.h(*p)) > tol.on_sigma and t != "arc":
        rep.add(f"({t})", f"p = {p} is not on Σ (h(p) = {Z.h(*p):.3g})")
        return rep
    try:
        Z.h.check_regular([p] + list(pc.crossings))
    except ValueError as exc:
        rep.add("(Σ)", str(exc))
    if t in ("a", "b"):
        try:
            m, vis = contact_multiplicity(Z.xplus, Z.h, p, "+", tol)
            if (m, vis) != (2 * pc.k, True):
                rep.add(f"({t})", f"contact_multiplicity mismatch at p: expected ({2 * pc.k}, visible), "
                        f"got ({m}, {'visible' if vis else 'invisible' if vis is False else 'odd'})")
        except FlatContactError as exc:
            rep.add(f"({t})", f"contact_multiplicity mismatch at p: {exc}")
        x1p = Z.xplus(*p)[0]
        if not x1p > 0:
            rep.add(f"({t}.1)", f"X1+(p)>0 fails: X1+(p) = {x1p:.6g}")
        xmh = Z.lie(p, "-")
        if not xmh > 0:
            rep.add(f"({t}.3)", f"X-h(p)>0 fails: X-h(p) = {xmh:.6g}",
                    "apply the -Z reduction, see negate_scenario; cycles found there are unstable for Z"
                    if t == "a" else "apply the -Z reduction, see negate_scenario")
    label2 = "(arc)" if t == "arc" else f"({t}.2)"
    for i, q in enumerate(pc.crossings, 1):
        if abs(Z.h(*q)) > tol.on_sigma:
            rep.add(label2, f"q_{i} = {q} is not on Σ")
            continue
        try:
            c = classify_sigma_point(Z, q, tol)
        except (FlatContactError, ValueError) as exc:
            rep.add(label2, f"q_{i} = {q} cannot be classified: {exc}")
            continue
        if c.kind != "crossing":
            what = c.kind + (" (attracting)" if c.attracting else " (repelling)" if c.kind == "sliding" else "")
            rep.add(label2, f"q_{i} = {q} is not a crossing point: {what}, "
                    f"X+h = {c.lie_plus:.6g}, X-h = {c.lie_minus:.6g}")
    for q in [p] + list(pc.crossings):
        r = _gamma_residual(scn, q)
        if r > 1e-8:
            rep.add("(Γ)", f"reference curve misses {q} by {r:.3g}")
    if t == "arc" and scn.prepared_at_crossings:
        for q in pc.crossings:
            ym = Z.xminus(*q)
            xp = Z.xplus(*q)
            grad = Z.h.grad_fn(*q)
            if not (ym == (1.0, 0.0) and xp[0] == 1.0 and grad == (1.0, 0.0)):
                rep.add("(prepared)", f"crossing {q} is not in prepared coordinates "
                        "(h = x, lower field (1, 0), upper field (1, X2))")
    if rep.diagnostics or t == "arc":
        return rep
    _check_closure(scn, rep, tol, opts)
    return rep


def _check_closure(scn, rep, tol, opts):
    Z, pc = scn.system, scn.polycycle
    p = pc.p
    if pc.type == "a":
        stop = Section.vertical(p[0], p[1] - 1e-4, p[1] + 1e-4, "increasing")
    else:
        stop = Section.horizontal(p[1], p[0] - 1e-4, p[0] + 1e-4, "increasing")
    label = f"({pc.type}.2)"
    try:
        traj = filippov_trajectory(Z, p, 50.0, opts, stop=stop, tol=tol)
    except IntegrationError as exc:
        rep.add(label, f"Γ does not close: {exc}")
        return
    end = traj.end
    resid = math.hypot(end[0] - p[0], end[1] - p[1])
    rep.info["closure_residual"] = resid
    if resid > 1e-7:
        rep.add(label, f"Γ does not close: residual {resid:.3g}")
    crosses = [e.p for e in traj.events if e.kind == "sigma-cross"]
    rep.info["crossings_found"] = crosses
    if len(crosses) != pc.m or any(math.hypot(a[0] - b[0], a[1] - b[1]) > 1e-6
                                   for a, b in zip(crosses, pc.crossings)):
        rep.add(label, f"orbit through p crosses Σ at {[(round(a, 8), round(b, 8)) for a, b in crosses]}, "
                f"declared {list(pc.crossings)}")
    if any(e.kind in ("sliding-entry",) for e in traj.events):
        rep.add(label, "orbit through p slides on Σ")
    pts = traj.points()
    if not all(scn.in_window(q) for q in pts):
        rep.add(label, "orbit through p leaves the scenario window")
    dist = float(points_to_polyline(pts, gamma_points(scn)).max())
    rep.info["gamma_distance"] = dist
    if dist > 1e-6:
        lab = "(b.3)" if pc.type == "b" else label
        rep.add(lab, f"separatrices of p leave the reference Γ (distance {dist:.3g})")


# --------------------------------------------------------------------------- -Z reduction

def negate_scenario(scn: Scenario, validate: bool = False) -> Scenario:
    """Time-reversed system ``-Z``, mirrored by ``x -> 2 p_x - x``.

    The mirror keeps the orientation convention ``X1+(p) > 0``; Σ must be
    invariant under it (true for ``h = y``). Cycles of the result are the
    mirrored, time-reversed cycles of the input.
    """
    Z = scn.system
    px = scn.polycycle.p[0]
    refl = {"x": parse_expr(f"{_num(2 * px)} - x") if px else -parse_expr("x")}

    def mirror(X: VectorField2) -> VectorField2:
        # (-Z) pushed forward by R(x, y) = (2px - x, y): (X1 o R, -X2 o R)
        return VectorField2(subst_expr(X.f1, refl), -subst_expr(X.f2, refl))

    h_new = ScalarField(subst_expr(Z.h.expr, refl))
    system = FilippovSystem(mirror(Z.xplus), mirror(Z.xminus), h_new)
    pc = scn.polycycle
    g = pc.gamma_dict
    if g.get("kind") == "circle":
        c = g["center"]
        g = {**g, "center": [2 * px - c[0], c[1]]}
    elif g.get("kind") == "graphs":
        x0, x1 = g["x_range"]
        g = {**g, "upper": str(subst_expr(parse_expr(g["upper"]), refl)),
             "lower": str(subst_expr(parse_expr(g["lower"]), refl)), "x_range": [2 * px - x1, 2 * px - x0]}
    elif g.get("kind") == "orbit" and "invariant" in g:
        g = {**g, "invariant": str(subst_expr(parse_expr(g["invariant"]), refl))}
    new_pc = replace(pc, crossings=tuple((2 * px - q[0], q[1]) for q in pc.crossings), gamma=_freeze(g))
    out = Scenario(name=f"{scn.name}:reversed", system=system, polycycle=new_pc, window=(
        2 * px - scn.window[1], 2 * px - scn.window[0], scn.window[2], scn.window[3]),
        prepared_at_crossings=scn.prepared_at_crossings, transition=scn.transition, params=scn.params,
        notes="time-reversed and mirrored copy of " + scn.name)
    if validate:
        rep = validate_scenario(out)
        if not rep.ok:
            raise ScenarioValidationError(rep.diagnostics)
    return out

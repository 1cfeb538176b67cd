"""Fixed points of return maps, limit cycles of the regularized flow, sweeps and verdicts."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .fields import lie_derivative, contact_multiplicity
from .geometry import points_to_polyline, resample_closed
from .integrate import DEFAULT_OPTIONS, IntegrationError, IntegratorOptions, Trajectory, flow_to_section
from .maps import (MapEvaluator, default_lambda, estimate_K, estimate_S, lambda_star, return_map_eps,
                   tangent_orbit_height)
from .regularize import transition_from_spec
from .scenarios import Scenario, ScenarioValidationError, gamma_points, validate_scenario

__all__ = [
    "FixedPointResult", "CycleResult", "SweepRow", "SweepReport", "Verdict", "PreconditionError",
    "find_fixed_points", "limit_cycle_search", "hausdorff_distance", "epsilon_sweep",
    "theorem_a_verdict", "theorem_b_verdict", "prop1_verdict", "default_eps_list", "isocline_check",
    "to_json",
]

MARGINAL = 1e-3
INCONCLUSIVE_BAND = 0.02


class PreconditionError(ValueError):
    pass


def _clean(v):
    """JSON-safe floats: non-finite values become ``None``."""
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return _clean(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "to_dict"):
        return _clean(v.to_dict())
    return v


def to_json(obj) -> str:
    """Deterministic JSON (sorted keys, fixed separators)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


# --------------------------------------------------------------------------- fixed points

@dataclass
class FixedPointResult:
    location: float
    derivative: float
    stability: str
    bracket: tuple
    residual: float

    def to_dict(self):
        return {"location": self.location, "derivative": self.derivative, "stability": self.stability,
                "bracket": list(self.bracket), "residual": self.residual}


def _stability(d: float) -> str:
    if abs(abs(d) - 1.0) <= MARGINAL:
        return "marginal"
    return "stable" if abs(d) < 1.0 else "unstable"


def _map_derivative(m, u):
    if isinstance(m, MapEvaluator):
        if m.has_variational:
            return m.variational_derivative(u)
        return m.derivative_at(u)
    from .maps import central_derivative
    return central_derivative(m, u)


def find_fixed_points(m, window=None, grid_n: int = 33, xtol: float = 1e-14) -> List[FixedPointResult]:
    """Fixed points of a 1-D map at the sign changes of ``g(u) = m(u) - u`` on a grid.

    Each bracket is polished with Brent's method. Fixed points where ``g``
    touches zero without changing sign are not detected.
    """
    if window is None:
        window = m.domain
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"empty window [{lo}, {hi}]")
    us = np.linspace(lo, hi, grid_n)
    g = [m(u) - u for u in us]

    def fun(u):
        return m(u) - u

    out = []
    for i in range(grid_n):
        a, ga = us[i], g[i]
        if ga == 0.0:
            roots = [(a, (a, a))]
        elif i + 1 < grid_n and ga * g[i + 1] < 0:
            b = us[i + 1]
            r = brentq(fun, a, b, xtol=xtol, maxiter=200)
            roots = [(r, (float(a), float(b)))]
        else:
            continue
        for r, br in roots:
            d = _map_derivative(m, r)
            out.append(FixedPointResult(float(r), float(d), _stability(d), br, float(abs(fun(r)))))
    return out


# --------------------------------------------------------------------------- limit cycles

@dataclass
class CycleResult:
    eps: float
    window: tuple
    fixed_points: List[FixedPointResult]
    fixed_point: Optional[FixedPointResult] = None
    cycle: Optional[Trajectory] = None
    closure: Optional[float] = None
    period: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self):
        return {"eps": self.eps, "window": list(self.window),
                "fixed_points": [f.to_dict() for f in self.fixed_points],
                "closure": self.closure, "period": self.period, "error": self.error}


def limit_cycle_search(scn: Scenario, phi, eps: float, lam: Optional[float] = None, window=None, grid_n: int = 33,
                       opts: IntegratorOptions = DEFAULT_OPTIONS, closure_tol: float = 1e-8,
                       return_map: Optional[MapEvaluator] = None) -> CycleResult:
    """Fixed points of ``pi_eps`` in ``window`` (default: the map's domain) and the closed orbit.

    The orbit through the fixed point nearest the reference intersection of Γ
    is integrated once around; its closure residual is reported.
    """
    phi = transition_from_spec(phi)
    lam = default_lambda(scn.k, phi.smoothness) if lam is None else lam
    if scn.type == "a" and not 0 < lam < lambda_star(scn.k, phi.smoothness):
        raise PreconditionError(f"lambda must lie in (0, lambda*) = (0, {lambda_star(scn.k, phi.smoothness):.6g})")
    m = return_map or return_map_eps(scn, phi, eps, lam, opts)
    window = tuple(window or m.domain)
    fps = find_fixed_points(m, window, grid_n)
    res = CycleResult(eps, window, fps)
    if not fps:
        return res
    ref = m.meta.get("ybar", scn.polycycle.p[0])
    fp = min(fps, key=lambda f: abs(f.location - ref))
    res.fixed_point = fp
    sec = m.source
    p0 = sec.point(fp.location)
    _, t, traj = flow_to_section(m.field, p0, sec, opts, record=True)
    res.cycle, res.period = traj, t
    res.closure = math.hypot(traj.end[0] - p0[0], traj.end[1] - p0[1])
    if res.closure > closure_tol:
        res.error = f"closure residual {res.closure:.3g} exceeds {closure_tol:g}"
    return res


def _closed_points(curve, tol: float, max_spacing: float = 1e-3) -> np.ndarray:
    pts = curve.dense_points(max_spacing) if isinstance(curve, Trajectory) else np.asarray(curve, float)
    if len(pts) < 3:
        raise ValueError("curve needs at least three points")
    gap = math.hypot(*(pts[-1] - pts[0]))
    if gap > tol:
        raise ValueError(f"curve is not closed: endpoint gap {gap:.3g} > {tol:g}")
    return pts


def hausdorff_distance(a, b, n_min: int = 2000, closed_tol: float = 1e-8) -> float:
    """Symmetric Hausdorff distance between two closed curves.

    ``a`` and ``b`` are trajectories or arrays of samples; both are
    resampled to at least ``n_min`` points equally spaced in arc length and
    compared point-to-polyline.
    """
    pa, pb = _closed_points(a, closed_tol), _closed_points(b, closed_tol)
    na, nb = max(n_min, len(pa)), max(n_min, len(pb))
    ra, rb = resample_closed(pa, na), resample_closed(pb, nb)
    return float(max(points_to_polyline(ra, pb).max(), points_to_polyline(rb, pa).max()))


# --------------------------------------------------------------------------- sweeps

def default_eps_list(k: int) -> List[float]:
    base = [8e-4, 4e-4, 2e-4, 1e-4]
    return base if k == 1 else [8 * e for e in base]


@dataclass
class SweepRow:
    eps: float
    fixed_points: List[FixedPointResult]
    hausdorff_to_gamma: Optional[float]
    K_eff: Optional[float]
    closure: Optional[float] = None
    window: tuple = ()
    error: Optional[str] = None
    cycle: Optional[Trajectory] = None

    def to_dict(self):
        return {"eps": self.eps, "fixed_points": [f.to_dict() for f in self.fixed_points],
                "hausdorff_to_gamma": self.hausdorff_to_gamma, "K_eff": self.K_eff,
                "closure": self.closure, "window": list(self.window), "error": self.error}


@dataclass
class SweepReport:
    scenario: str
    phi: str
    lam: float
    rows: List[SweepRow]
    fit: dict = field(default_factory=dict)

    def to_dict(self):
        return {"scenario": self.scenario, "phi": self.phi, "lambda": self.lam,
                "rows": [r.to_dict() for r in self.rows], "fit": self.fit}

    @property
    def distances(self):
        return [r.hausdorff_to_gamma for r in self.rows]

    def strictly_decreasing(self) -> bool:
        d = self.distances
        return all(x is not None for x in d) and all(b < a for a, b in zip(d[:-1], d[1:]))


def _sweep_row(args) -> SweepRow:
    scn, phi, eps, lam, grid_n, opts = args
    try:
        cr = limit_cycle_search(scn, phi, eps, lam, grid_n=grid_n, opts=opts)
    except (IntegrationError, ValueError) as exc:
        return SweepRow(eps, [], None, None, error=f"{type(exc).__name__}: {exc}")
    row = SweepRow(eps, cr.fixed_points, None, None, cr.closure, cr.window, cr.error, cr.cycle)
    if cr.cycle is not None:
        fp = cr.fixed_point.location
        if scn.type == "a":
            ybar = tangent_orbit_height(scn.system.xplus, scn.polycycle.p, scn.polycycle.p[0] - scn.polycycle.rho)
            row.K_eff = (fp - ybar) / eps
        else:
            row.K_eff = (fp - scn.polycycle.p[0]) / eps
        try:
            row.hausdorff_to_gamma = hausdorff_distance(cr.cycle.dense_points(1e-3), gamma_points(scn),
                                                        closed_tol=max(1e-8, 10 * (cr.closure or 0)))
        except ValueError as exc:
            row.error = str(exc)
    return row


def epsilon_sweep(scn: Scenario, phi, eps_list: Optional[Sequence[float]] = None, lam: Optional[float] = None,
                  grid_n: int = 33, opts: IntegratorOptions = DEFAULT_OPTIONS, workers: int = 1) -> SweepReport:
    """Limit-cycle search and distance to Γ for each ``eps``; log-log fit of the distances."""
    phi = transition_from_spec(phi)
    lam = default_lambda(scn.k, phi.smoothness) if lam is None else lam
    eps_list = list(eps_list or default_eps_list(scn.k))
    if len(eps_list) < 4:
        raise ValueError("eps_list needs at least 4 entries")
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    jobs = [(scn, phi, e, lam, grid_n, opts) for e in eps_list]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    rep = SweepReport(scn.name, phi.label(), lam, rows)
    pairs = [(r.eps, r.hausdorff_to_gamma) for r in rows if r.hausdorff_to_gamma]
    if len(pairs) >= 2:
        le, ld = np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs])
        slope, icpt = np.polyfit(le, ld, 1)
        pred = slope * le + icpt
        ss = float(np.sum((ld - ld.mean()) ** 2))
        r2 = 1.0 - float(np.sum((ld - pred) ** 2)) / ss if ss > 0 else 1.0
        rep.fit = {"convergence_exponent": float(slope), "r2": r2}
    else:
        rep.fit = {"convergence_exponent": None, "r2": None}
    return rep


# --------------------------------------------------------------------------- verdicts

@dataclass
class Verdict:
    theorem: str
    inputs: dict
    prediction: str
    observation: str
    agree: bool
    status: str
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    fit: dict = field(default_factory=dict)

    def to_dict(self):
        return {"theorem": self.theorem, "inputs": self.inputs, "prediction": self.prediction,
                "observation": self.observation, "agree": self.agree, "status": self.status,
                "rows": [r.to_dict() if hasattr(r, "to_dict") else r for r in self.rows],
                "notes": self.notes, "fit": self.fit}

    def to_json(self) -> str:
        return to_json(self.to_dict())


def _require(scn: Scenario, ptype: str, theorem: str):
    if scn.type != ptype:
        raise PreconditionError(f"{theorem} needs a type ({ptype}) polycycle; scenario {scn.name!r} is type ({scn.type})")
    rep = validate_scenario(scn)
    if not rep.ok:
        raise ScenarioValidationError(rep.diagnostics)


def _discriminant(scn, phi):
    K = estimate_K(scn)
    S = estimate_S(scn, phi, strict=False)
    return K, S, K.value + S.value - 1.0


def theorem_a_verdict(scn: Scenario, phi, lam: Optional[float] = None, eps_list=None, grid_n: int = 33,
                      opts: IntegratorOptions = DEFAULT_OPTIONS, workers: int = 1) -> Verdict:
    """Existence or nonexistence of cycles through the upper section, from the sign of ``K + S - 1``."""
    _require(scn, "a", "Theorem A")
    phi = transition_from_spec(phi)
    k, n = scn.k, phi.smoothness
    if n < 2 * k - 1:
        raise PreconditionError(f"transition class n = {n} must be at least 2k - 1 = {2 * k - 1}")
    ls = lambda_star(k, n)
    lam = default_lambda(k, n) if lam is None else lam
    K, S, disc = _discriminant(scn, phi)
    inputs = {"K": K.value, "K_error": K.error, "S": S.value, "S_fd": S.fd, "discriminant": disc,
              "k": k, "n": n, "lambda": lam, "lambda_star": ls}
    if abs(disc) <= INCONCLUSIVE_BAND:
        return Verdict("A", inputs, "none (K+S-1 is numerically zero)", "not computed", False, "inconclusive",
                       notes=[f"|K+S-1| = {abs(disc):.3g} <= {INCONCLUSIVE_BAND}"])
    if disc < 0 and not 1.0 / (2 * k) < lam < ls:
        raise PreconditionError(f"existence needs lambda in (1/2k, lambda*) = ({1 / (2 * k):g}, {ls:.6g})")
    rep = epsilon_sweep(scn, phi, eps_list, lam, grid_n, opts, workers)
    counts = [len(r.fixed_points) for r in rep.rows]
    errors = [r.error for r in rep.rows if r.error]
    if disc > 0:
        prediction = "no limit cycle through the upper section for every eps"
        agree = all(c == 0 for c in counts) and not errors
        observation = f"fixed points per eps: {counts}"
    else:
        prediction = "unique asymptotically stable limit cycle, eps-close to the polycycle"
        stable = all(len(r.fixed_points) == 1 and r.fixed_points[0].stability == "stable" for r in rep.rows)
        slope = rep.fit.get("convergence_exponent")
        agree = stable and rep.strictly_decreasing() and slope is not None and slope >= 0.9 and not errors
        observation = (f"fixed points per eps: {counts}; stable: {stable}; distances: "
                       f"{[None if d is None else float(f'{d:.6g}') for d in rep.distances]}; "
                       f"exponent: {None if slope is None else round(slope, 4)}")
    v = Verdict("A", inputs, prediction, observation, agree, "agree" if agree else "disagree", rep.rows)
    v.notes.extend(errors)
    v.fit = rep.fit
    return v


def theorem_b_verdict(scn: Scenario, phi, eps_list=None, lam: Optional[float] = None, grid_n: int = 33,
                      opts: IntegratorOptions = DEFAULT_OPTIONS, workers: int = 1) -> Verdict:
    """At least one limit cycle per eps, converging to the polycycle."""
    _require(scn, "b", "Theorem B")
    phi = transition_from_spec(phi)
    lam = default_lambda(scn.k, phi.smoothness) if lam is None else lam
    rep = epsilon_sweep(scn, phi, eps_list, lam, grid_n, opts, workers)
    counts = [len(r.fixed_points) for r in rep.rows]
    errors = [r.error for r in rep.rows if r.error]
    agree = all(c >= 1 for c in counts) and rep.strictly_decreasing() and not errors
    inputs = {"k": scn.k, "n": phi.smoothness, "lambda": lam, "phi": phi.label()}
    obs = (f"fixed points per eps: {counts}; distances: "
           f"{[None if d is None else float(f'{d:.6g}') for d in rep.distances]}")
    v = Verdict("B", inputs, "at least one limit cycle per eps, converging to the polycycle", obs, agree,
                "agree" if agree else "disagree", rep.rows, errors)
    v.fit = rep.fit
    return v


def isocline_check(scn: Scenario, eps0: float = 1e-2, n_y: int = 21, n_x: int = 4001) -> dict:
    """Unique root of ``X+h(., y) = 0`` across the window for ``y`` in ``[0, eps0]``.

    At ``y = 0`` the root must be ``p`` with the declared contact order.
    """
    X, h = scn.system.xplus, scn.system.h
    x0, x1 = scn.window[0], scn.window[1]
    xs = np.linspace(x0, x1, n_x)
    fx, hg = X.fn, h.grad_fn
    py = scn.polycycle.p[1]
    rows = []
    ok = True
    for y in py + np.linspace(0.0, eps0, n_y):
        g = []
        for x in xs:
            a, b = fx(x, y)
            gx, gy = hg(x, y)
            g.append(gx * a + gy * b)
        g = np.asarray(g)
        nroots = int(np.sum(g[:-1] * g[1:] < 0) + np.sum(g == 0))
        rows.append({"y": float(y), "roots": nroots})
        ok &= nroots == 1
    mult, vis = contact_multiplicity(X, h, scn.polycycle.p)
    ok &= mult == 2 * scn.k
    return {"ok": bool(ok), "rows": rows, "multiplicity": mult, "visible": vis,
            "lie_at_p": lie_derivative(X, h, scn.polycycle.p, 1)}


def prop1_verdict(scn: Scenario, phi, eps_list=None, lam: Optional[float] = None, widths=(2.0, 4.0, 8.0),
                  grid_n: int = 17, hyperbolic_bound: float = 0.9,
                  opts: IntegratorOptions = DEFAULT_OPTIONS) -> Verdict:
    """Global version of Theorem A: scans windows of width ``W eps`` around Γ's section point.

    Prediction from the signs of ``K + S - 1`` and ``K - 1`` only. The
    stable case also certifies hyperbolicity: ``max |pi_eps'|`` over the
    widest window must not exceed ``hyperbolic_bound``.
    """
    _require(scn, "a", "Proposition 1")
    phi = transition_from_spec(phi)
    lam = default_lambda(scn.k, phi.smoothness) if lam is None else lam
    iso = isocline_check(scn)
    if not iso["ok"]:
        raise PreconditionError(f"isocline uniqueness check failed: {iso['rows']}, multiplicity {iso['multiplicity']}")
    K, S, disc = _discriminant(scn, phi)
    inputs = {"K": K.value, "S": S.value, "discriminant": disc, "k": scn.k, "n": phi.smoothness, "lambda": lam}
    if abs(disc) <= INCONCLUSIVE_BAND or abs(K.value - 1.0) <= INCONCLUSIVE_BAND:
        return Verdict("Prop1", inputs, "none (K+S-1 or K-1 numerically zero)", "not computed", False,
                       "inconclusive")
    if disc > 0 and K.value > 1:
        prediction = "no limit cycle converging to the polycycle"
    elif disc < 0 and K.value < 1:
        prediction = "unique hyperbolic stable limit cycle converging to the polycycle"
    else:
        return Verdict("Prop1", inputs, "outside the sign cases covered", "not computed", False, "inconclusive")
    eps_list = list(eps_list or default_eps_list(scn.k))
    rows, agree = [], True
    for eps in eps_list:
        m = return_map_eps(scn, phi, eps, lam, opts)
        yb = m.meta["ybar"]
        found = set()
        per_window = []
        for W in widths:
            win = (max(scn.polycycle.p[1] + eps, yb - W * eps), yb + W * eps)
            fps = find_fixed_points(m, win, grid_n)
            per_window.append({"width": W, "window": list(win), "fixed_points": [f.to_dict() for f in fps]})
            found.update(round(f.location, 9) for f in fps)
        row = {"eps": eps, "windows": per_window, "distinct_fixed_points": sorted(found)}
        if disc < 0:
            win = per_window[-1]["window"]
            dmax = max(abs(m.variational_derivative(u)) for u in np.linspace(win[0], win[1], grid_n))
            row["max_abs_derivative"] = dmax
            ok = len(found) == 1 and dmax <= hyperbolic_bound
        else:
            ok = len(found) == 0
        row["ok"] = ok
        agree &= ok
        rows.append(row)
    obs = "; ".join(f"eps={r['eps']:g}: {len(r['distinct_fixed_points'])} fixed point(s)"
                    + (f", max|pi'|={r['max_abs_derivative']:.3g}" if "max_abs_derivative" in r else "")
                    for r in rows)
    v = Verdict("Prop1", inputs, prediction, obs, bool(agree), "agree" if agree else "disagree", rows,
                ["global scan over windows of width W*eps around the polycycle's section point",
                 f"isocline check: {iso['multiplicity']}-contact, unique root on {len(iso['rows'])} levels"])
    return v

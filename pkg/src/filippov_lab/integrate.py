"""Event-driven adaptive integration and Filippov trajectories.

The stepper is the Dormand-Prince 5(4) pair with its quartic dense output
(tableau taken from :class:`scipy.integrate.RK45`). It is written over plain
Python floats: the fields here are cheap scalar expressions, so per-step
overhead matters more than vectorisation. Events are bracketed by sign
changes between accepted steps and located on the dense output with
:func:`scipy.optimize.brentq`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from .expr import Var
from .fields import (DEFAULT_TOL, FilippovSystem, Tolerances, VectorField2,
                     contact_multiplicity)

__all__ = [
    "IntegratorOptions", "DEFAULT_OPTIONS", "Section", "Trajectory", "Segment", "TrajectoryEvent",
    "IntegrationError", "MaxTimeExceeded", "StepSizeUnderflow", "AmbiguousContinuation", "WindowEscape",
    "flow_to_section", "flow_with_variation", "flow_for_time", "filippov_trajectory",
]

_A = [[float(v) for v in row] for row in RK45.A]
_B = [float(v) for v in RK45.B]
_C = [float(v) for v in RK45.C]
_E = [float(v) for v in RK45.E]
_P = [[float(v) for v in row] for row in RK45.P]


class IntegrationError(RuntimeError):
    pass


class MaxTimeExceeded(IntegrationError):
    pass


class StepSizeUnderflow(IntegrationError):
    def __init__(self, t, p, h):
        super().__init__(f"step size underflow (h={h:.3g}) at t={t:.12g}, p=({p[0]:.12g}, {p[1]:.12g});"
                         " the problem is likely stiff here")
        self.t, self.p, self.h = t, tuple(p), h


class WindowEscape(IntegrationError):
    pass


class AmbiguousContinuation(IntegrationError):
    """Forward continuation at a Σ point is not unique under Filippov's convention."""


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 0.1
    event_tol: float = 1e-12
    band_step_cap: float = 0.5      # multiple of eps inside |h| <= eps
    max_time: float = 100.0
    max_steps: int = 5_000_000
    min_step: float = 1e-14

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol", "band_step_cap", "max_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def with_(self, **kw) -> "IntegratorOptions":
        return replace(self, **kw)


DEFAULT_OPTIONS = IntegratorOptions()


_DIRECTIONS = {"increasing": 1, "decreasing": -1, "either": 0}


@dataclass(frozen=True)
class Section:
    """Axis-aligned transversal segment ``{x = value}`` or ``{y = value}``."""

    kind: str
    value: float
    range: Tuple[float, float] = (-math.inf, math.inf)
    direction: str = "either"

    def __post_init__(self):
        if self.kind not in ("vertical", "horizontal"):
            raise ValueError("section kind must be 'vertical' or 'horizontal'")
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"crossing direction must be one of {sorted(_DIRECTIONS)}")
        lo, hi = self.range
        if not hi - lo > 0:
            raise ValueError("section range must have positive length")

    @classmethod
    def vertical(cls, x, lo=-math.inf, hi=math.inf, direction="either"):
        return cls("vertical", float(x), (float(lo), float(hi)), direction)

    @classmethod
    def horizontal(cls, y, lo=-math.inf, hi=math.inf, direction="either"):
        return cls("horizontal", float(y), (float(lo), float(hi)), direction)

    @property
    def axis(self) -> int:
        """Index of the constrained coordinate."""
        return 0 if self.kind == "vertical" else 1

    @property
    def sign(self) -> int:
        return _DIRECTIONS[self.direction]

    def point(self, u: float):
        return (self.value, float(u)) if self.kind == "vertical" else (float(u), self.value)

    def coordinate(self, p) -> float:
        return p[1 - self.axis]

    def contains(self, u: float, slack: float = 0.0) -> bool:
        return self.range[0] - slack <= u <= self.range[1] + slack

    def with_range(self, lo, hi) -> "Section":
        return replace(self, range=(float(lo), float(hi)))

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "range": list(self.range),
                "direction": self.direction}


# --------------------------------------------------------------------------- trajectories

@dataclass
class TrajectoryEvent:
    t: float
    p: Tuple[float, float]
    kind: str            # section-hit | sigma-cross | sliding-entry | sliding-exit | tangency-exit
    detail: str = ""


@dataclass
class Segment:
    regime: str          # '+', '-', 'sliding', 'regularized' or 'smooth'
    t: List[float] = field(default_factory=list)
    points: List[Tuple[float, float]] = field(default_factory=list)
    # dense pieces (t0, h, y0, Q, sigma_end); y(t0 + s h) = y0 + h * sum_j Q[c][j] s^(j+1)
    pieces: list = field(default_factory=list)


class Trajectory:
    """Ordered regime segments plus the events met along the way."""

    def __init__(self, segments=None, events=None):
        self.segments: List[Segment] = list(segments or [])
        self.events: List[TrajectoryEvent] = list(events or [])

    def __repr__(self):
        return (f"Trajectory({len(self.segments)} segments, {len(self.events)} events, "
                f"t=[{self.t_start:g}, {self.t_end:g}])")

    @property
    def start(self):
        return self.segments[0].points[0]

    @property
    def end(self):
        return self.segments[-1].points[-1]

    @property
    def t_start(self):
        return self.segments[0].t[0] if self.segments else 0.0

    @property
    def t_end(self):
        return self.segments[-1].t[-1] if self.segments else 0.0

    def samples(self):
        """``(t, x, y, regime)`` rows with strictly increasing time."""
        rows = []
        for seg in self.segments:
            for t, p in zip(seg.t, seg.points):
                if rows and t <= rows[-1][0]:
                    continue
                rows.append((t, p[0], p[1], seg.regime))
        return rows

    def times(self):
        return np.array([r[0] for r in self.samples()])

    def points(self):
        return np.array([[r[1], r[2]] for r in self.samples()])

    def events_of(self, kind: str):
        return [e for e in self.events if e.kind == kind]

    def dense_points(self, max_spacing: float = 1e-3) -> np.ndarray:
        """Points along the dense output with chord length at most ``max_spacing``."""
        out = []
        for seg in self.segments:
            if not seg.pieces:
                out.extend(seg.points)
                continue
            for t0, h, y0, Q, s_end in seg.pieces:
                p_end = _dense_eval(h, y0, Q, s_end)
                chord = math.hypot(p_end[0] - y0[0], p_end[1] - y0[1])
                n = max(1, int(math.ceil(4.0 * chord / max_spacing)))
                for i in range(n):
                    out.append(_dense_eval(h, y0, Q, s_end * i / n))
            out.append(seg.points[-1])
        pts = np.asarray(out, dtype=float)
        # chord estimate above is conservative; refine any remaining long gaps linearly
        if len(pts) > 1:
            gaps = np.hypot(*np.diff(pts, axis=0).T)
            if np.any(gaps > max_spacing):
                pts = _refine_polyline(pts, max_spacing)
        return pts

    def is_closed(self, tol: float = 1e-8) -> bool:
        s, e = self.start, self.end
        return math.hypot(e[0] - s[0], e[1] - s[1]) <= tol

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["t", "x", "y", "regime"])
        for t, x, y, reg in self.samples():
            w.writerow([repr(t), repr(x), repr(y), reg])
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def events_json(self):
        return [{"t": e.t, "x": e.p[0], "y": e.p[1], "kind": e.kind, "detail": e.detail}
                for e in self.events]

    def extend(self, other: "Trajectory"):
        self.segments.extend(other.segments)
        self.events.extend(other.events)


def _refine_polyline(pts, max_spacing):
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(math.hypot(*(b - a)) / max_spacing)))
        for i in range(1, n + 1):
            out.append(a + (b - a) * (i / n))
    return np.asarray(out)


def _dense_eval(h, y0, Q, s):
    out = []
    for c in range(len(y0)):
        q = Q[c]
        out.append(y0[c] + h * s * (q[0] + s * (q[1] + s * (q[2] + s * q[3]))))
    return out


# --------------------------------------------------------------------------- core stepper

@dataclass
class _Event:
    g: Callable[[list], float]
    direction: int = 0
    terminal: bool = True
    name: str = ""
    accept: Optional[Callable[[list], bool]] = None
    snap: Optional[Tuple[int, float]] = None   # set component exactly after location


@dataclass
class _RunResult:
    status: str                    # 'event' | 'time'
    t: float
    y: list
    event: Optional[_Event] = None
    pieces: list = field(default_factory=list)
    ts: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    err_max: float = 0.0
    n_steps: int = 0


def _run(F, y0, t0, t_end, opts: IntegratorOptions, events=(), band=None, record=True,
         atol=None, scale_groups=None):
    """Integrate ``y' = F(y)`` forward from ``t0`` until ``t_end`` or a terminal event.

    ``atol`` may give per-component absolute tolerances. ``scale_groups`` is a
    list of index tuples whose error scale uses the group's max norm (used for
    variational components, which may pass through zero).
    """
    n = len(y0)
    y = [float(v) for v in y0]
    t = float(t0)
    rtol = opts.rel_tol
    atol = [opts.abs_tol] * n if atol is None else list(atol)
    a_, b_, e_, p_ = _A, _B, _E, _P
    max_step = opts.max_step
    k0 = F(y)
    if band is not None:
        hfn, gfn, eps = band
        cap = opts.band_step_cap * eps
    gvals = [ev.g(y) for ev in events]
    res = _RunResult("time", t, y)
    if record:
        res.ts.append(t)
        res.ys.append(tuple(y[:2]))

    def scales(ya, yb):
        sc = [atol[i] + rtol * max(abs(ya[i]), abs(yb[i])) for i in range(n)]
        if scale_groups:
            for grp in scale_groups:
                m = max(max(abs(ya[i]), abs(yb[i])) for i in grp)
                for i in grp:
                    sc[i] = atol[i] + rtol * m if m > 0 else 1e-300
        return sc

    # initial step from the local scale of y and y'
    sc = scales(y, y)
    d0 = math.sqrt(sum((y[i] / sc[i]) ** 2 for i in range(n)) / n)
    d1 = math.sqrt(sum((k0[i] / sc[i]) ** 2 for i in range(n)) / n)
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, max_step, 1e-2)
    steps = 0
    while True:
        if t >= t_end:
            res.status, res.t, res.y = "time", t, y
            return res
        hmax = min(max_step, t_end - t)
        if band is not None:
            hv = hfn(y[0], y[1])
            ah = abs(hv)
            if ah <= eps:
                hmax = min(hmax, cap)
            else:
                gx, gy = gfn(y[0], y[1])
                hdot = gx * k0[0] + gy * k0[1]
                if hv * hdot < 0:
                    hmax = min(hmax, (ah - eps) / abs(hdot) + cap)
        if h > hmax:
            h = hmax
        if h < opts.min_step * max(1.0, abs(t)):
            raise StepSizeUnderflow(t, y, h)
        # stages
        K = [k0]
        for s in range(1, 6):
            row = a_[s]
            ys = [y[i] + h * sum(row[j] * K[j][i] for j in range(s)) for i in range(n)]
            K.append(F(ys))
        y_new = [y[i] + h * sum(b_[j] * K[j][i] for j in range(6)) for i in range(n)]
        k_new = F(y_new)
        K.append(k_new)
        err = [h * sum(e_[j] * K[j][i] for j in range(7)) for i in range(n)]
        sc = scales(y, y_new)
        err_norm = math.sqrt(sum((err[i] / sc[i]) ** 2 for i in range(n)) / n)
        if not math.isfinite(err_norm):
            h *= 0.2
            continue
        if err_norm > 1.0:
            h *= max(0.2, 0.9 * err_norm ** -0.2)
            continue
        steps += 1
        if steps > opts.max_steps:
            raise IntegrationError(f"more than {opts.max_steps} steps at t={t:g}")
        res.err_max = max(res.err_max, err_norm)
        Q = [[sum(K[j][i] * p_[j][m] for j in range(7)) for m in range(4)] for i in range(n)]
        t_new = t + h
        # events
        hit = None
        if events:
            new_g = []
            for idx, ev in enumerate(events):
                g0 = gvals[idx]
                g1 = ev.g(y_new)
                new_g.append(g1)
                d = ev.direction
                if (d >= 0 and g0 < 0.0 <= g1) or (d <= 0 and g0 > 0.0 >= g1):
                    if g1 == 0.0:
                        s_root = 1.0
                    else:
                        s_root = brentq(lambda s: ev.g(_dense_eval(h, y, Q, s)), 0.0, 1.0,
                                        xtol=1e-15, maxiter=200)
                    yr = _dense_eval(h, y, Q, s_root)
                    if ev.snap is not None:
                        yr[ev.snap[0]] = ev.snap[1]
                    if ev.accept is not None and not ev.accept(yr):
                        continue
                    if hit is None or s_root < hit[0]:
                        hit = (s_root, yr, ev)
            gvals = new_g
        if hit is not None and hit[2].terminal:
            s_root, yr, ev = hit
            if record:
                res.pieces.append((t, h, list(y), Q, s_root))
                res.ts.append(t + s_root * h)
                res.ys.append(tuple(yr[:2]))
            res.status, res.t, res.y, res.event, res.n_steps = "event", t + s_root * h, yr, ev, steps
            return res
        if record:
            res.pieces.append((t, h, list(y), Q, 1.0))
            res.ts.append(t_new)
            res.ys.append(tuple(y_new[:2]))
        t, y, k0 = t_new, y_new, k_new
        res.n_steps = steps
        fac = 10.0 if err_norm == 0.0 else min(10.0, 0.9 * err_norm ** -0.2)
        h *= fac


# --------------------------------------------------------------------------- smooth flows

def _field_callable(X):
    fn = X.fn if hasattr(X, "fn") else X
    return lambda s: fn(s[0], s[1])


def _section_event(target: Section, name="section"):
    ax, c = target.axis, target.value
    lo, hi = target.range
    free = 1 - ax
    return _Event(g=lambda s: s[ax] - c, direction=target.sign, terminal=True, name=name,
                  accept=lambda s: lo <= s[free] <= hi, snap=(ax, c))


def _regime_of(X):
    if hasattr(X, "band"):
        return "regularized"
    return "smooth"


def _band_of(X):
    return getattr(X, "band", None)


def _segment_from(res: _RunResult, regime: str) -> Segment:
    seg = Segment(regime)
    seg.t, seg.points = list(res.ts), list(res.ys)
    seg.pieces = [(t0, h, y0[:2], Q[:2], s) for (t0, h, y0, Q, s) in res.pieces]
    return seg


def flow_to_section(X, p0, target: Section, opts: IntegratorOptions = DEFAULT_OPTIONS,
                    record: bool = True, max_time: Optional[float] = None):
    """Flow ``X`` from ``p0`` to the first admissible hit of ``target``.

    ``X`` may be a :class:`VectorField2`, a regularized field, any callable
    ``(x, y) -> (fx, fy)``, or a :class:`FilippovSystem` (then Filippov's
    convention is applied along the way). Returns ``(p_hit, t_hit, traj)``.
    """
    T = opts.max_time if max_time is None else max_time
    if isinstance(X, FilippovSystem):
        traj = filippov_trajectory(X, p0, T, opts, stop=target)
        hits = traj.events_of("section-hit")
        if not hits:
            raise MaxTimeExceeded(f"no hit of {target.kind} section {target.value:g} within t={T:g}")
        return hits[-1].p, hits[-1].t, traj
    res = _run(_field_callable(X), list(p0), 0.0, T, opts, [_section_event(target)],
               band=_band_of(X), record=record)
    if res.status != "event":
        raise MaxTimeExceeded(
            f"no hit of {target.kind} section at {target.value:g} within t={T:g} from {tuple(p0)}")
    p_hit = (res.y[0], res.y[1])
    traj = Trajectory()
    if record:
        traj.segments.append(_segment_from(res, _regime_of(X)))
        traj.events.append(TrajectoryEvent(res.t, p_hit, "section-hit"))
    else:
        seg = Segment(_regime_of(X), [0.0, res.t], [tuple(p0), p_hit])
        traj.segments.append(seg)
    return p_hit, res.t, traj


def flow_for_time(X, p0, t_max: float, opts: IntegratorOptions = DEFAULT_OPTIONS) -> Trajectory:
    res = _run(_field_callable(X), list(p0), 0.0, t_max, opts, band=_band_of(X))
    traj = Trajectory([_segment_from(res, _regime_of(X))])
    return traj


def flow_with_variation(X, p0, w0, target: Section, opts: IntegratorOptions = DEFAULT_OPTIONS,
                        max_time: Optional[float] = None):
    """Flow to ``target`` together with the tangent vector ``w`` (variational equation).

    Returns ``(p_hit, t_hit, w_hit, du)`` where ``du`` is the derivative of
    the hit coordinate along the section in the direction ``w0``. ``du`` is
    the transverse part of ``w``, obtained from Liouville's formula
    ``det(f, w)(t) = det(f, w)(0) exp(int div f)``; it keeps full relative
    accuracy when transverse contraction makes it exponentially small,
    where projecting ``w`` would cancel catastrophically.
    """
    fn, jac = X.fn, X.jacobian_fn

    def F(s):
        fx, fy = fn(s[0], s[1])
        a, b, c, d = jac(s[0], s[1])
        return [fx, fy, a * s[2] + b * s[3], c * s[2] + d * s[3], a + d]

    T = opts.max_time if max_time is None else max_time
    ev = _section_event(target)
    res = _run(F, [p0[0], p0[1], w0[0], w0[1], 0.0], 0.0, T, opts, [ev], band=_band_of(X),
               record=False, atol=[opts.abs_tol, opts.abs_tol, 0.0, 0.0, opts.abs_tol],
               scale_groups=[(2, 3)])
    if res.status != "event":
        raise MaxTimeExceeded(f"no hit of section within t={T:g} from {tuple(p0)}")
    x, y, wx, wy, logdet = res.y
    f0x, f0y = fn(p0[0], p0[1])
    det = (f0x * w0[1] - f0y * w0[0]) * math.exp(logdet)
    fx, fy = fn(x, y)
    du = det / fx if target.kind == "vertical" else -det / fy
    return (x, y), res.t, (wx, wy), du


# --------------------------------------------------------------------------- Filippov trajectories

def _axis_snap(h) -> Optional[int]:
    e = h.expr
    if isinstance(e, Var):
        return 0 if e.name == "x" else 1
    return None


def _lies(Z: FilippovSystem, p):
    return Z.lie(p, "+"), Z.lie(p, "-")


def _visible(Z, p, side, tol):
    X = Z.xplus if side == "+" else Z.xminus
    m, vis = contact_multiplicity(X, Z.h, p, side, replace(tol, on_sigma=max(tol.on_sigma, 1e-8)))
    return bool(vis)


def _next_regime(Z, p, a, b, arriving: Optional[str], tol: Tolerances):
    """Regime after reaching Σ at ``p`` (``arriving`` is None for a start on Σ).

    Returns ``(regime, event_kind)``.
    """
    ta, tb = abs(a) <= tol.lie, abs(b) <= tol.lie
    if ta and tb:
        raise AmbiguousContinuation(f"both fields tangent to Σ at {tuple(p)}")
    if not ta and not tb:
        if a > 0 and b > 0:
            return "+", "sigma-cross"
        if a < 0 and b < 0:
            return "-", "sigma-cross"
        if a < 0 < b:
            return "sliding", "sliding-entry"
        raise AmbiguousContinuation(f"repelling sliding point {tuple(p)}: forward motion not unique")
    if ta:   # X+ tangent, X- transversal
        vis = _visible(Z, p, "+", tol)
        if b > 0:
            return ("+", "tangency-exit") if vis else ("sliding", "sliding-entry")
        if vis and arriving != "+":
            raise AmbiguousContinuation(f"visible X+ tangency with X- leaving downward at {tuple(p)}")
        return "-", "sigma-cross"
    vis = _visible(Z, p, "-", tol)
    if a < 0:
        return ("-", "tangency-exit") if vis else ("sliding", "sliding-entry")
    if vis and arriving != "-":
        raise AmbiguousContinuation(f"visible X- tangency with X+ leaving upward at {tuple(p)}")
    return "+", "sigma-cross"


def filippov_trajectory(Z: FilippovSystem, p0, t_max: float, opts: IntegratorOptions = DEFAULT_OPTIONS,
                        stop: Optional[Section] = None, tol: Tolerances = DEFAULT_TOL,
                        max_switches: int = 10_000, window=None) -> Trajectory:
    """Trajectory of ``Z`` from ``p0`` under Filippov's convention.

    Crossing points concatenate the one-sided flows, attracting sliding
    points start a sliding segment along the sliding vector field, which ends
    where ``X+h`` or ``X-h`` changes sign. If ``stop`` is given the run ends at
    its first admissible hit (``MaxTimeExceeded`` if none within ``t_max``).
    ``window = (xmin, xmax, ymin, ymax)`` raises :class:`WindowEscape` when left.
    """
    h, hgrad = Z.h.fn, Z.h.grad_fn
    snap_ax = _axis_snap(Z.h)
    p = (float(p0[0]), float(p0[1]))
    t = 0.0
    traj = Trajectory()
    hv = h(*p)
    if abs(hv) <= tol.on_sigma:
        a, b = _lies(Z, p)
        regime, _ = _next_regime(Z, p, a, b, None, tol)
    else:
        regime = "+" if hv > 0 else "-"
    if t_max <= 0:
        traj.segments.append(Segment(regime, [0.0], [p]))
        return traj
    fp, fm = Z.xplus.fn, Z.xminus.fn

    def sliding_F(s):
        x, y = s[0], s[1]
        gx, gy = hgrad(x, y)
        px, py = fp(x, y)
        mx, my = fm(x, y)
        a = gx * px + gy * py
        b = gx * mx + gy * my
        den = b - a
        return [(b * px - a * mx) / den, (b * py - a * my) / den]

    def lie_ev(F, d, name):
        def g(s):
            gx, gy = hgrad(s[0], s[1])
            fx, fy = F(s[0], s[1])
            return gx * fx + gy * fy
        return _Event(g=g, direction=d, terminal=True, name=name)

    stop_ev = _section_event(stop, "stop") if stop is not None else None
    win_evs = []
    if window is not None:
        x0, x1, y0, y1 = window
        win_evs = [_Event(g=lambda s: s[0] - x0, direction=-1, name="window"),
                   _Event(g=lambda s: s[0] - x1, direction=1, name="window"),
                   _Event(g=lambda s: s[1] - y0, direction=-1, name="window"),
                   _Event(g=lambda s: s[1] - y1, direction=1, name="window")]
    for _ in range(max_switches):
        if regime == "+":
            F = lambda s: list(fp(s[0], s[1]))
            evs = [_Event(g=lambda s: h(s[0], s[1]), direction=-1, name="sigma",
                          snap=(snap_ax, 0.0) if snap_ax is not None else None)]
        elif regime == "-":
            F = lambda s: list(fm(s[0], s[1]))
            evs = [_Event(g=lambda s: h(s[0], s[1]), direction=1, name="sigma",
                          snap=(snap_ax, 0.0) if snap_ax is not None else None)]
        else:
            F = sliding_F
            evs = [lie_ev(fp, 1, "exit+"), lie_ev(fm, -1, "exit-")]
        if stop_ev is not None:
            evs.insert(0, stop_ev)     # wins ties with a simultaneous Σ event
        evs.extend(win_evs)
        res = _run(F, list(p), t, t_max, opts, evs)
        seg = _segment_from(res, regime)
        traj.segments.append(seg)
        p = (res.y[0], res.y[1])
        if regime == "sliding" and snap_ax is not None:
            q = list(p)
            q[snap_ax] = 0.0
            p = (q[0], q[1])
            seg.points[-1] = p
        if res.status == "time":
            if stop is not None:
                raise MaxTimeExceeded(f"no hit of the stop section within t={t_max:g}")
            return traj
        t = res.t
        ev = res.event
        if ev.name == "stop":
            traj.events.append(TrajectoryEvent(t, p, "section-hit"))
            return traj
        if ev.name == "window":
            raise WindowEscape(f"trajectory leaves the window {tuple(window)} at {p}")
        if ev.name in ("exit+", "exit-"):
            new = "+" if ev.name == "exit+" else "-"
            a, b = _lies(Z, p)
            kind = "tangency-exit" if (abs(a) <= tol.lie or abs(b) <= tol.lie) else "sliding-exit"
            traj.events.append(TrajectoryEvent(t, p, "sliding-exit", f"to {new} ({kind})"))
            regime = new
            continue
        a, b = _lies(Z, p)
        regime_new, kind = _next_regime(Z, p, a, b, regime, tol)
        traj.events.append(TrajectoryEvent(t, p, kind, f"{regime}->{regime_new}"))
        regime = regime_new
    raise IntegrationError(f"more than {max_switches} regime switches (chattering?)")

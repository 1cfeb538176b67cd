"""Command-line front end.

Exit codes: 0 success (verdict agrees), 1 verdict disagrees or is
inconclusive, 2 invalid input or failed hypothesis, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from .analysis import (PreconditionError, epsilon_sweep, prop1_verdict, theorem_a_verdict, theorem_b_verdict,
                       to_json)
from .expr import Const
from .fields import classify_sigma_point
from .integrate import DEFAULT_OPTIONS, IntegrationError, IntegratorOptions, filippov_trajectory, flow_for_time
from .maps import (MapDomainError, default_lambda, filippov_return_map, lower_transition_map, return_map_eps,
                   upper_transition_map)
from .regularize import MonotonicityError, regularized_field, transition_from_spec
from .scenarios import BUILTINS, Scenario, ScenarioError, ScenarioValidationError, builtin, load_scenario

EXIT_OK, EXIT_DISAGREE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    params: dict = field(default_factory=dict)
    phi: Optional[str] = None
    eps: List[float] = field(default_factory=list)
    lam: Optional[float] = None
    out: Optional[Path] = None
    tol: dict = field(default_factory=dict)

    def resolve(self) -> Scenario:
        if self.scenario in BUILTINS:
            return builtin(self.scenario, **self.params)
        path = Path(self.scenario)
        if not path.exists():
            raise UsageError(f"unknown scenario {self.scenario!r}: not a builtin ({', '.join(sorted(BUILTINS))}) "
                             "and not a file")
        if self.params:
            raise UsageError("--param applies to builtin scenarios only")
        return load_scenario(path)

    def options(self) -> IntegratorOptions:
        names = {f.name for f in dc_fields(IntegratorOptions)}
        bad = set(self.tol) - names
        if bad:
            raise UsageError(f"unknown tolerance key(s) {sorted(bad)}; valid: {sorted(names)}")
        return DEFAULT_OPTIONS.with_(**self.tol)

    def transition(self, scn: Scenario):
        return transition_from_spec(self.phi or scn.transition_spec)


def _number(v: str):
    try:
        return int(v)
    except ValueError:
        return float(v)


def _pairs(items, what) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"{what} expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = _number(v.strip())
        except ValueError as exc:
            raise UsageError(f"{what} {k}: {v!r} is not a number") from exc
    return out


def _floats(text: Optional[str]) -> List[float]:
    if not text:
        return []
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def _config(args) -> RunConfig:
    out = Path(args.out) if args.out else None
    return RunConfig(args.scenario, _pairs(args.param, "--param"), args.phi, _floats(args.eps), args.lam, out,
                     _pairs(args.tol, "--tol"))


def _emit(cfg: RunConfig, name: str, text: str, stdout: bool = True):
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / name).write_text(text, encoding="utf-8", newline="")
    elif stdout:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


# --------------------------------------------------------------------------- commands

def _sigma_points(scn: Scenario, lo: float, hi: float, step: float):
    """Points of Σ on a grid of the coordinate along it (``x`` unless Σ is vertical)."""
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1 if step > 0 else 0
    if n < 1 or hi < lo:
        raise UsageError(f"empty classification grid {lo}:{hi}:{step}")
    grid = [round(lo + i * step, 12) for i in range(n)]
    h = scn.system.h
    x0, x1, y0, y1 = scn.window
    gy = h.gradient[1]
    vertical = isinstance(gy, Const) and gy.value == 0.0
    pts = []
    for s in grid:
        if vertical:
            f, a, b = (lambda x: h(x, s)), x0, x1
        else:
            f, a, b = (lambda y: h(s, y)), y0, y1
        fa, fb = f(a), f(b)
        if fa == 0:
            r = a
        elif fb == 0:
            r = b
        elif fa * fb < 0:
            r = brentq(f, a, b, xtol=1e-15)
        else:
            continue
        pts.append((r, s) if vertical else (s, r))
    if not pts:
        raise UsageError("no switching-curve points on the grid inside the window")
    return pts


def cmd_classify(args) -> int:
    cfg = _config(args)
    scn = cfg.resolve()
    x0, x1 = scn.window[0], scn.window[1]
    lo = x0 if args.lo is None else args.lo
    hi = x1 if args.hi is None else args.hi
    rows = []
    for p in _sigma_points(scn, lo, hi, args.step):
        c = classify_sigma_point(scn.system, p)
        rows.append((p[0], p[1], c.kind, c.lie_plus, c.lie_minus, c.multiplicity,
                     "" if c.visible is None else str(bool(c.visible)).lower()))
    _emit(cfg, "classify.csv", _csv(["x", "y", "kind", "lie1+", "lie1-", "multiplicity", "visible"], rows))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    scn = cfg.resolve()
    p0 = _floats(args.p0)
    if len(p0) != 2:
        raise UsageError("--p0 expects x,y")
    if not scn.in_window(p0):
        raise UsageError(f"p0 = {tuple(p0)} lies outside the scenario window {scn.window}")
    opts = cfg.options()
    if cfg.eps:
        Z = regularized_field(scn.system, cfg.transition(scn), cfg.eps[0])
        traj = flow_for_time(Z, p0, args.t_max, opts)
    else:
        traj = filippov_trajectory(scn.system, p0, args.t_max, opts)
    _emit(cfg, "trajectory.csv", traj.to_csv())
    _emit(cfg, "events.json", to_json(traj.events_json()), stdout=cfg.out is None and args.events)
    return EXIT_OK


def _grid(args, domain):
    if args.u:
        return _floats(args.u)
    lo = domain[0] if args.lo is None else args.lo
    hi = domain[1] if args.hi is None else args.hi
    if not hi > lo or args.n < 2:
        raise UsageError("empty map grid")
    return list(np.linspace(lo, hi, args.n))


def cmd_return_map(args) -> int:
    cfg = _config(args)
    scn = cfg.resolve()
    opts = cfg.options()
    if cfg.eps:
        m = return_map_eps(scn, cfg.transition(scn), cfg.eps[0], cfg.lam, opts)
    else:
        m = filippov_return_map(scn, opts)
    us = _grid(args, m.domain if cfg.eps else (1e-3, scn.polycycle.eta))
    _emit(cfg, "return_map.csv", m.to_csv(us, derivative=not args.no_derivative))
    return EXIT_OK


def cmd_transition_map(args) -> int:
    cfg = _config(args)
    scn = cfg.resolve()
    if not cfg.eps:
        raise UsageError("transition-map needs --eps")
    phi = cfg.transition(scn)
    lam = cfg.lam if cfg.lam is not None else default_lambda(scn.k, phi.smoothness)
    make = upper_transition_map if args.which == "upper" else lower_transition_map
    pc = scn.polycycle
    rho = args.rho if args.rho is not None else pc.rho
    theta = args.theta if args.theta is not None else pc.theta
    rows, summary = [], []
    for eps in cfg.eps:
        m = make(scn, phi, eps, rho=rho, theta=theta, lam=lam, opts=cfg.options())
        us = list(np.linspace(*m.source.range, args.n))
        for u in us:
            rows.append((eps, float(u), m(u), m.variational_derivative(u)))
        summary.append({"eps": eps, "spread": m.spread(us), "integrated_spread": m.collapse_spread(us),
                        "source": m.source.to_dict(), "target": m.target.to_dict()})
    _emit(cfg, "transition_map.csv", _csv(["eps", "input", "output", "derivative"], rows))
    _emit(cfg, "transition_map.json", to_json({"map": args.which, "lambda": lam, "rho": rho, "theta": theta,
                                                "phi": phi.label(), "rows": summary}), stdout=False)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    scn = cfg.resolve()
    rep = epsilon_sweep(scn, cfg.transition(scn), cfg.eps or None, cfg.lam, opts=cfg.options(),
                        workers=args.workers)
    _emit(cfg, "sweep.json", to_json(rep))
    if cfg.out is not None:
        for i, r in enumerate(rep.rows):
            if r.cycle is not None:
                r.cycle.to_csv(cfg.out / f"cycle_{i}.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    scn = cfg.resolve()
    phi = cfg.transition(scn)
    opts = cfg.options()
    eps = cfg.eps or None
    if args.theorem == "A":
        v = theorem_a_verdict(scn, phi, cfg.lam, eps, opts=opts, workers=args.workers)
    elif args.theorem == "B":
        v = theorem_b_verdict(scn, phi, eps, cfg.lam, opts=opts, workers=args.workers)
    else:
        v = prop1_verdict(scn, phi, eps, cfg.lam, opts=opts)
    _emit(cfg, "verdict.json", v.to_json())
    return EXIT_OK if v.agree else EXIT_DISAGREE


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="filippov-lab", description="Planar Filippov systems, their "
                                 "regularizations and limit cycles near Σ-polycycles.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="builtin name or scenario JSON path")
        p.add_argument("--param", action="append", metavar="K=V", help="builtin parameter (repeatable)")
        p.add_argument("--phi", help="transition function: hermite:n or bump:n:c")
        p.add_argument("--eps", help="comma-separated eps values")
        p.add_argument("--lambda", dest="lam", type=float, help="section exponent lambda")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--tol", action="append", metavar="K=V", help="integrator option override, e.g. rel_tol=1e-11")
        return p

    p = common(sub.add_parser("classify", help="classify Σ points on a grid"))
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--step", type=float, default=0.1)
    p.set_defaults(func=cmd_classify)

    p = common(sub.add_parser("simulate", help="integrate one trajectory"))
    p.add_argument("--p0", required=True, help="start point x,y")
    p.add_argument("--t-max", dest="t_max", type=float, default=10.0)
    p.add_argument("--events", action="store_true", help="also print events JSON when writing to stdout")
    p.set_defaults(func=cmd_simulate)

    for name, func, hlp in (("return-map", cmd_return_map, "tabulate pi_Gamma (or pi_eps with --eps)"),):
        p = common(sub.add_parser(name, help=hlp))
        p.add_argument("--u", help="comma-separated inputs")
        p.add_argument("--lo", type=float)
        p.add_argument("--hi", type=float)
        p.add_argument("--n", type=int, default=17)
        p.add_argument("--no-derivative", action="store_true")
        p.set_defaults(func=func)

    p = common(sub.add_parser("transition-map", help="tabulate U_eps or L_eps and their spread"))
    p.add_argument("--which", choices=("upper", "lower"), default="upper")
    p.add_argument("--rho", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--n", type=int, default=9)
    p.set_defaults(func=cmd_transition_map)

    p = common(sub.add_parser("sweep", help="limit cycles along an eps ladder"))
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("verify", help="check a theorem's prediction numerically"))
    p.add_argument("theorem", choices=("A", "B", "prop1"))
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        print("scenario validation failed:", file=sys.stderr)
        for d in exc.diagnostics:
            print(f"  {d}", file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, ScenarioError, PreconditionError, MonotonicityError, MapDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IntegrationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

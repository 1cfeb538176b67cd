"""The Filippov return map of the cubic type (b) polycycle.

Above y = 0 the orbits are level sets of y - x^2 + x^3, so a point (x, 0) with
x small comes back to y = 0 at the far root of s^2 - s^3 = x^2 - x^3. The
return map of the Filippov system can therefore be checked against a scalar
root solve, and the regularized maps compared with it.
"""
from scipy.optimize import brentq

from filippov_lab.analysis import theorem_b_verdict
from filippov_lab.integrate import DEFAULT_OPTIONS
from filippov_lab.maps import return_map_filippov
from filippov_lab.regularize import bump_transition, hermite_transition
from filippov_lab.scenarios import builtin

scn = builtin("type_b_cubic")
opts = DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)

print(f"{'x':>6} {'integrated':>16} {'root solve':>16}")
for x in (0.01, 0.02, 0.05, 0.1):
    c = x * x - x ** 3
    exact = 1 - brentq(lambda s: s * s - s ** 3 - c, 2 / 3, 1, xtol=1e-15)
    print(f"{x:6.2f} {return_map_filippov(scn, x, opts):16.12f} {exact:16.12f}")

for phi in (hermite_transition(1), bump_transition(1, 0.05)):
    v = theorem_b_verdict(scn, phi, eps_list=[8e-3, 4e-3, 2e-3, 1e-3])
    print(f"\n{phi.label()}: {v.status}; {v.observation}")
    for r in v.rows:
        print(f"  eps={r.eps:.0e}  distance to Gamma {r.hausdorff_to_gamma:.3e}")

"""Watching the transition maps collapse.

Near a visible fold the regularized flow squeezes a whole segment of the upper
section into an exponentially thin band. The raw max - min of the outputs
bottoms out at integrator noise long before that, so the spread printed here
is the integral of |U'| along the section, which the variational equation
resolves far below machine epsilon.
"""
from filippov_lab.integrate import DEFAULT_OPTIONS
from filippov_lab.maps import lower_transition_map, upper_transition_map
from filippov_lab.regularize import hermite_transition
from filippov_lab.scenarios import builtin

opts = DEFAULT_OPTIONS.with_(rel_tol=1e-12, abs_tol=1e-13)
phi = hermite_transition(1)

for name, make, scn in (("U_eps", upper_transition_map, builtin("type_a_circle", b=0.1)),
                        ("L_eps", lower_transition_map, builtin("type_b_cubic"))):
    print(name)
    for eps in (4e-3, 2e-3, 1e-3):
        m = make(scn, phi, eps, lam=0.3, opts=opts)
        us = m.grid(9)
        print(f"  eps={eps:.0e}  raw {m.spread(us):.1e}  integrated {m.collapse_spread(us):.2e}")

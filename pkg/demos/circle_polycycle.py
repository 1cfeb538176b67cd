"""Limit cycles of the regularized circle polycycle.

The upper field winds around the unit circle centred at (0, 1) and is tangent
to y = 0 at the origin. With b > 0 nearby orbits spiral in, so K < 1, and the
regularized system should carry one stable cycle that shrinks onto the circle
as eps goes to zero. Run it with ``python3 demos/circle_polycycle.py``.
"""
import math

from filippov_lab.analysis import hausdorff_distance, limit_cycle_search
from filippov_lab.maps import estimate_K, estimate_S
from filippov_lab.regularize import hermite_transition
from filippov_lab.scenarios import builtin, gamma_points

scn = builtin("type_a_circle", b=0.1)
phi = hermite_transition(1)

K = estimate_K(scn).value
print(f"K = {K:.6f}   (exp(-2 pi b) = {math.exp(-0.2 * math.pi):.6f})")
print(f"S = {estimate_S(scn, phi).value}   (no crossings, so nothing to add)")
print(f"K + S - 1 = {K - 1:.4f} < 0: expect a stable cycle\n")

gamma = gamma_points(scn)
print(f"{'eps':>8} {'fixed point':>14} {'pi_eps prime':>13} {'dist to Gamma':>14}")
for eps in (8e-3, 4e-3, 2e-3, 1e-3):
    res = limit_cycle_search(scn, phi, eps, lam=0.75)
    fp = res.fixed_point
    d = hausdorff_distance(res.cycle.dense_points(1e-3), gamma, closed_tol=1e-7)
    print(f"{eps:8.0e} {fp.location:14.8f} {fp.derivative:13.3e} {d:14.3e}")

# Flip the sign of b and the cycle disappears.
res = limit_cycle_search(builtin("type_a_circle", b=-0.1), phi, 1e-3, lam=0.75)
print(f"\nb = -0.1, eps = 1e-3: {len(res.fixed_points)} fixed points")

"""Saddle search on a driven linear oscillator and on a soft well.

For F = w0^2 x^2 / 2 - eps cos(w t) x the periodic solution is
x = eps / (w0^2 - w^2) cos(w t).  The constants are maxima of the action and
the zero-mean curves carry a minimum, so the solution is a saddle point.
"""

import math

from actionforge import LinearOscillator, SoftWell, check_saddle_geometry, saddle_search
from actionforge.solvers import SolveConfig

p = LinearOscillator(1.0, 2.0, 0.3, math.pi)
geometry = check_saddle_geometry(p, 5.0, SolveConfig(M=8))
print(f"oscillator geometry: sup on sphere {geometry.sup_sphere:.4f}, inf on zero-mean {geometry.inf_zero_mean:.4f}")
r = saddle_search(p, SolveConfig(M=8))
print(f"{r.status} after {r.iterations} iterations, f = {r.f_value:.6f}")
print(f"cos coefficient {r.trajectory.cos[0, 0]:.12f}, closed form {p.amplitude():.12f}")

w = SoftWell(0.1, 1.0)
geometry = check_saddle_geometry(w, 5.0, SolveConfig(M=8), b=0.1)
print(f"soft well geometry holds: {geometry.holds}, below period threshold: {geometry.threshold_ok}")
r = saddle_search(w, SolveConfig(M=8))
print(f"soft well: {r.status}, constant solution: {r.extra['constant_solution']}")

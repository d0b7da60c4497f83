"""Periodic solution of a forced pendulum by direct minimization.

Solves u'' = -sin u + 0.3 cos(2 pi t) with period 1, checks the ODE residual
and compares against an independent shooting solve.
"""

import math

import numpy as np

from actionforge import ForcedPendulum, Lattice, minimize_direct, ode_residual, shooting_oracle
from actionforge.potential import Forcing
from actionforge.solvers import SolveConfig
from actionforge.verify import oracle_gap

p = ForcedPendulum(1.0, Forcing.scalar(1.0, cos=[0.3]))
lattice = Lattice((2 * math.pi,))

for seed in range(3):
    r = minimize_direct(None, p, cfg=SolveConfig(M=16, seed=seed))
    rep = ode_residual(r.trajectory, p)
    print(f"seed {seed}: {r.status} after {r.iterations} iterations, f = {r.f_value:.12f}, "
          f"residual {rep.residual_sup:.2e}, mean {r.trajectory.mean[0]:.6f}")

u = r.trajectory
oracle = shooting_oracle(p, 1.0, np.concatenate([u.evaluate(0.0), u.evaluate(0.0, 1)]), 1)
print(f"shooting defect {oracle.defect:.2e}, sup-norm gap to spectral solution "
      f"{oracle_gap(u, oracle, lattice):.2e}")

t = np.linspace(0.0, 1.0, 9)
for ti, ui in zip(t, u.evaluate(t)[:, 0]):
    print(f"  u({ti:.3f}) = {ui:.8f}")

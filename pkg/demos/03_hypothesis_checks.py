"""Sampled checks of the growth and periodicity conditions on a pendulum."""

import math

from actionforge import ForcedPendulum, ForcedPotential, Lattice, Pendulum, SampleGrid
from actionforge.potential import Forcing, check_F1, check_F3, check_lattice_integral

lattice = Lattice((2 * math.pi,))
p = ForcedPendulum(1.0, Forcing.scalar(1.0, cos=[0.5]))
grid = SampleGrid.default(p)

for rep in (check_F1(p, grid), check_lattice_integral(p, lattice),
            check_F3(p, 0.1, 1.625, grid), check_F3(p, 0.1, 1.0, grid)):
    print(f"{rep.condition:<17} passed={rep.passed!s:<5} worst={rep.worst_violation:.3g} witness={rep.witness}")

# ForcedPendulum rejects a biased drive, so assemble the pieces directly
biased = ForcedPotential(Pendulum(1.0, 1.0), Forcing.scalar(1.0, cos=[0.5], mean=0.25))
rep = check_lattice_integral(biased, lattice)
print(f"with a mean forcing of 0.25 the lattice discrepancy is {rep.magnitude:.6f} (2 pi * 0.25 = {math.pi / 2:.6f})")

"""Removing the regularization: eps -> 0 and M -> infinity.

Mollification of g and truncation of the reaction arguments are switched
on only for these studies. Successive runs along each ladder should get
closer together.

    python demos/regularization.py
"""

import numpy as np

from crossdiff import Grid, ModelSpec, SolverConfig
from crossdiff import presets, verify

g = Grid.uniform(64)
(x,) = g.centers()
cfg = SolverConfig(dt=1e-3, t_end=0.5)

u0, v0 = g.field(1.0 + 0.5 * np.cos(np.pi * x)), g.field(0.6 + 0.4 * np.cos(2 * np.pi * x))
rep = verify.regularization_convergence(presets.competition(), cfg, u0, v0, [0.08, 0.04, 0.02, 0.01])
print("eps ladder 0.08 -> 0.01:", ", ".join(f"{d:.3e}" for d in rep.errors), f"(order ~{rep.order:.2f})")

# truncation only bites on large populations
model = ModelSpec(presets.competition_diffusivity(u_max=10.0), presets.competition_reaction(), d_v=1.0)
big_u, big_v = g.field(5 + 4.5 * np.cos(np.pi * x)), g.field(5 + 4.5 * np.cos(2 * np.pi * x))
rep = verify.regularization_convergence(model, cfg, big_u, big_v, [2.0, 4.0, 8.0, np.inf], kind="M")
print("M ladder 2 -> inf:      ", ", ".join(f"{d:.3e}" for d in rep.errors))

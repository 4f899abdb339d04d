"""How fast do two nearby solutions drift apart?

Perturbs the competition data, runs both solutions, and fits a Gronwall
rate to the weighted L2 distance and to the dual-norm distance. Halving
the perturbation should quarter the distance.

    python demos/stability.py
"""

import numpy as np

from crossdiff import Grid, SolverConfig
from crossdiff import presets, verify

model = presets.competition()
g = Grid.uniform(64)
(x,) = g.centers()
pair = (g.field(1.0 + 0.5 * np.cos(np.pi * x)), g.field(0.6 + 0.4 * np.cos(2 * np.pi * x)))
du = g.field(1e-2 * np.cos(np.pi * x))
dv = g.field(1e-2 * np.cos(3 * np.pi * x))
cfg = SolverConfig(dt=1e-3, t_end=1.0)

for label, experiment in (("L2", verify.stability_experiment),
                          ("dual", verify.dual_stability_experiment)):
    full = experiment(model, cfg, pair, (du, dv))
    half = experiment(model, cfg, pair, (0.5 * du, 0.5 * dv))
    print(f"{label:>4}: weight {full.lam:8.3f}  K = {full.K:+.3f}  C_stab = {full.c_stab:.3f}  "
          f"D(0) = {full.D[0]:.3e}  D(1) = {full.D[-1]:.3e}  "
          f"scaling {np.max(full.D) / np.max(half.D):.3f}")

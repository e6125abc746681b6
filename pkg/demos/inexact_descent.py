"""Fixed-step descent on a Rayleigh quotient with exact and relatively bounded gradients."""

import numpy as np

from grassopt import Constant, Exact, FixedStepConfig, RelativeBounded, random_point, rigd_run
from grassopt.objective import random_spd, rayleigh_objective

rng = np.random.default_rng(2)
obj = rayleigh_objective(random_spd(16, rng), 2)
x0 = random_point(16, 2, rng)
cfg = FixedStepConfig(Constant(1.0 / obj.lipschitz), 300)
for name, oracle in [("exact", Exact()), ("delta=0.3", RelativeBounded(0.3, seed=0))]:
    _, tr = rigd_run(obj, oracle, x0, cfg)
    gap = tr.column("f_value")[-1] - obj.minimum
    print(f"{name:10s} final gap to minimum {gap:.2e}")

"""Compare the analytic gradient of Jeffrey's divergence against central differences."""

import numpy as np

from grassopt import fd_gradient_check, neg_objective, random_point
from grassopt.objective import random_class_stats

rng = np.random.default_rng(1)
for n, p in [(8, 2), (16, 3), (32, 4)]:
    obj = neg_objective(random_class_stats(n, rng, with_mean=True))
    err = fd_gradient_check(obj, random_point(n, p, rng), rng=rng)
    print(f"n={n:2d} p={p}  relative mismatch {err:.2e}")

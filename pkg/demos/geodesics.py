"""Walk a great circle on Gr(1, 3) and watch the subspace distance grow linearly."""

import numpy as np

from grassopt import TangentVector, exp_map, project_tangent, random_point, subspace_distance

rng = np.random.default_rng(0)
x = random_point(3, 1, rng)
v = project_tangent(x, rng.standard_normal((3, 1)))
v = TangentVector(v.mat / np.linalg.norm(v.mat), x)
for t in np.linspace(0.0, np.pi / 2, 7):
    print(f"t={t:.3f}  distance={subspace_distance(x, exp_map(x, v, t)):.3f}")

"""Relative Frobenius error of sample covariances as the sample size grows."""

import numpy as np

from grassopt.config import preset
from grassopt.experiments import covariance_errors

cfg = preset("table1", sample_sizes=[10, 100, 1000], seeds=list(range(5)))
errs = covariance_errors(cfg)
for n, row in zip(cfg.sample_sizes, np.median(errs, axis=1)):
    print(f"N={n:5d}  class 1 {row[0]:.2f}%  class 2 {row[1]:.2f}%")

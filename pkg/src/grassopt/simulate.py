"""Gaussian image classes on a square pixel grid.

Pixels are indexed lexicographically (row-major), so an image of ``side x side``
pixels is a vector of length ``n = side**2``. Each class has a stationary
squared-exponential covariance with unit marginal variance

    K[a, b] = exp(-|r_a - r_b|^2 / (2 sigma^2)) + nugget * [a == b]

whose correlation length ``sigma`` distinguishes the two classes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg

from . import io
from .errors import ConfigError, CovarianceError, InsufficientSamplesError
from .grassmann import as_rng
from .objective import ClassStats

DEFAULT_NUGGET = 1e-8


@dataclass(frozen=True)
class GridSpec:
    side: int
    sigma1: float
    sigma2: float
    nugget: float = DEFAULT_NUGGET

    def __post_init__(self):
        if int(self.side) != self.side or self.side < 2:
            raise ConfigError(f"side must be an integer >= 2, got {self.side}")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ConfigError("correlation lengths must be positive")
        if not self.nugget >= 0:
            raise ConfigError("nugget must be nonnegative")

    @property
    def n(self) -> int:
        return self.side * self.side

    def sigma(self, which_class: int) -> float:
        if which_class not in (1, 2):
            raise ConfigError(f"class must be 1 or 2, got {which_class}")
        return self.sigma1 if which_class == 1 else self.sigma2

    def to_dict(self) -> dict:
        return asdict(self)


# correlation lengths in pixels
GRID_PRESETS = {
    "table1": GridSpec(side=16, sigma1=3.0, sigma2=4.5),
    "table1-full": GridSpec(side=50, sigma1=3.0, sigma2=4.5),
    "fig4": GridSpec(side=16, sigma1=0.55, sigma2=0.30),
    "fig4-paper": GridSpec(side=50, sigma1=0.55, sigma2=0.30),
    "fig2-small-gap": GridSpec(side=16, sigma1=0.45, sigma2=0.30),
    "fig2-large-gap": GridSpec(side=16, sigma1=1.80, sigma2=0.30),
}


def pixel_coords(side: int) -> np.ndarray:
    """``(n, 2)`` array of (row, col) coordinates in lexicographic order."""
    rows, cols = np.divmod(np.arange(side * side), side)
    return np.column_stack([rows, cols]).astype(float)


def build_covariance(grid: GridSpec, which_class: int) -> np.ndarray:
    """Squared-exponential covariance of class 1 or 2 on the grid."""
    sigma = grid.sigma(which_class)
    r = pixel_coords(grid.side)
    d2 = np.sum((r[:, None, :] - r[None, :, :]) ** 2, axis=-1)
    k = np.exp(-d2 / (2.0 * sigma * sigma))
    k[np.diag_indices_from(k)] += grid.nugget
    try:
        linalg.cholesky(k, lower=True)
    except linalg.LinAlgError as err:
        raise CovarianceError(
            f"covariance for sigma={sigma} on a {grid.side}x{grid.side} grid is not "
            f"numerically positive definite with nugget={grid.nugget:g}; increase the nugget"
        ) from err
    return k


def true_stats(grid: GridSpec) -> ClassStats:
    """Class statistics with equal means (``s = 0``)."""
    return ClassStats(build_covariance(grid, 1), build_covariance(grid, 2))


@dataclass(frozen=True, eq=False)
class Dataset:
    """``images`` is ``N x n``, one lexicographically ordered image per row."""

    images: np.ndarray
    label: int
    seed: Optional[int] = None

    @property
    def count(self) -> int:
        return self.images.shape[0]

    @property
    def n(self) -> int:
        return self.images.shape[1]


def sample_images(k: np.ndarray, mean, count: int, seed=None, label: int = 1) -> Dataset:
    """Draw ``count`` images ``mean + L z`` with ``K = L L^T`` and ``z`` standard normal."""
    k = np.asarray(k, dtype=float)
    n = k.shape[0]
    mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=float).reshape(n)
    try:
        chol = linalg.cholesky(k, lower=True)
    except linalg.LinAlgError as err:
        raise CovarianceError(f"cannot sample: covariance is not positive definite ({err})") from err
    z = as_rng(seed).standard_normal((int(count), n))
    images = mean + z @ chol.T
    images.setflags(write=False)
    return Dataset(images, label, seed if isinstance(seed, (int, np.integer)) else None)


def sample_covariance(data) -> np.ndarray:
    """Unbiased sample covariance ``(G - 1 mu^T)^T (G - 1 mu^T) / (N - 1)``."""
    g = data.images if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if g.ndim != 2 or g.shape[0] < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {g.shape[0] if g.ndim else 0}")
    centered = g - g.mean(axis=0)
    k = centered.T @ centered / (g.shape[0] - 1)
    return 0.5 * (k + k.T)


def shrink(k_hat: np.ndarray, lam: float) -> np.ndarray:
    """Convex combination ``(1 - lam) K_hat + lam I``."""
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"shrinkage lambda must lie in (0, 1), got {lam}")
    k_hat = np.asarray(k_hat, dtype=float)
    return (1.0 - lam) * k_hat + lam * np.eye(k_hat.shape[0])


def estimated_stats(truth: ClassStats, count: int, seed=None, lam: Optional[float] = None) -> ClassStats:
    """Class statistics re-estimated from ``count`` simulated images per class.

    Both classes are drawn from one generator seeded by ``seed``. With ``lam``
    the sample covariances are shrunk toward the identity.
    """
    rng = as_rng(seed)
    ests = []
    for label, k in ((1, truth.k1), (2, truth.k2)):
        khat = sample_covariance(sample_images(k, None, count, rng, label))
        ests.append(khat if lam is None else shrink(khat, lam))
    return ClassStats(ests[0], ests[1], truth.s, check=lam is not None)


def save_dataset(path, data: Dataset, grid: Optional[GridSpec] = None, extra: Optional[dict] = None):
    """GRMX image matrix plus a ``.json`` sidecar {class, N, grid, seed}."""
    path = Path(path)
    io.write_grmx(path, data.images)
    meta = {
        "class": data.label,
        "N": data.count,
        "grid": None if grid is None else grid.to_dict(),
        "seed": data.seed,
    }
    meta.update(extra or {})
    io.write_json(path.with_suffix(".json"), meta)


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta = io.read_json(path.with_suffix(".json"))
    return Dataset(io.read_grmx(path), meta["class"], meta.get("seed"))


def save_class_stats(directory, stats: ClassStats, grid: GridSpec, p: int, seed=None, extra=None):
    """Write ``k1.grmx``, ``k2.grmx``, ``s.grmx`` and ``stats.json`` into ``directory``."""
    d = Path(directory)
    io.write_grmx(d / "k1.grmx", stats.k1)
    io.write_grmx(d / "k2.grmx", stats.k2)
    io.write_grmx(d / "s.grmx", stats.s)
    meta = {
        "n": stats.n,
        "p": p,
        "sigma1": grid.sigma1,
        "sigma2": grid.sigma2,
        "seed": seed,
        "generator": "squared-exponential",
    }
    meta.update(extra or {})
    io.write_json(d / "stats.json", meta)


def load_class_stats(directory) -> tuple[ClassStats, dict]:
    d = Path(directory)
    meta = io.read_json(d / "stats.json")
    stats = ClassStats(io.read_grmx(d / "k1.grmx"), io.read_grmx(d / "k2.grmx"), io.read_grmx(d / "s.grmx"))
    return stats, meta

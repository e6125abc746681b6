"""Inexact gradient oracles.

An oracle turns a point ``x`` and iteration index ``k`` into an ambient
gradient estimate ``g_tilde``; the optimizer projects it onto the tangent space
to obtain the search direction. Each oracle also reports an error norm for the
trace (``None`` when no reference is available).

Four regimes are provided:

* :class:`Exact` - the objective's own gradient.
* :class:`AdditiveSchedule` - gradient plus noise of norm ``c / (k+1)**exponent``.
* :class:`RelativeBounded` - gradient plus a tangent error of norm
  ``delta * |grad f(x)|``, ``0 <= delta < 1``.
* :class:`SurrogateStats` - exact gradient of the divergence computed from
  other (estimated or perturbed) class statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, OracleFailure, SingularChannelError
from .grassmann import GrassmannPoint, as_rng, project_tangent, random_tangent
from .objective import ClassStats, Objective, ObjectiveConfig, jeffreys_grad_ambient, neg_objective

MAX_RETRIES = 10


def _check_shape(g: np.ndarray, x: GrassmannPoint):
    if g.shape != x.shape:
        raise DimensionError(f"gradient shape {g.shape} does not match point {x.shape}")


class Oracle:
    """Base class. Subclasses implement :meth:`gradient`."""

    kind = "oracle"

    def gradient(self, objective: Objective, x: GrassmannPoint, k: int,
                 reference: Optional[Objective] = None):
        raise NotImplementedError

    def value_objective(self, objective: Objective, k: int) -> Objective:
        """Objective whose values a line search should use at iteration ``k``."""
        return objective

    def describe(self) -> dict:
        return {"kind": self.kind}


class Exact(Oracle):
    kind = "exact"

    def gradient(self, objective, x, k, reference=None):
        g = np.asarray(objective.grad(x), dtype=float)
        _check_shape(g, x)
        return g, 0.0


class AdditiveSchedule(Oracle):
    """Adds ``c / (k+1)**exponent`` times a unit-Frobenius random ambient matrix.

    ``exponent > 0.5`` gives square-summable errors; ``exponent = 0`` is a
    constant-error control. The logged error is the injected norm.
    """

    kind = "additive"

    def __init__(self, c: float, exponent: float, seed=None):
        if not c > 0:
            raise ConfigError(f"additive error scale c must be positive, got {c}")
        if not exponent >= 0:
            raise ConfigError(f"exponent must be nonnegative, got {exponent}")
        self.c = float(c)
        self.exponent = float(exponent)
        self.seed = seed
        self.rng = as_rng(seed)

    def magnitude(self, k: int) -> float:
        return self.c / (k + 1) ** self.exponent

    def gradient(self, objective, x, k, reference=None):
        g = np.asarray(objective.grad(x), dtype=float)
        _check_shape(g, x)
        noise = self.rng.standard_normal(x.shape)
        mag = self.magnitude(k)
        return g + mag * noise / np.linalg.norm(noise), mag

    def describe(self):
        return {"kind": self.kind, "c": self.c, "exponent": self.exponent, "seed": self.seed}


class RelativeBounded(Oracle):
    """Adds a random tangent error of norm exactly ``delta * |P_x(grad)|``."""

    kind = "relative"

    def __init__(self, delta: float, seed=None):
        if not 0.0 <= delta < 1.0:
            raise ConfigError(f"relative error bound must satisfy 0 <= delta < 1, got {delta}")
        self.delta = float(delta)
        self.seed = seed
        self.rng = as_rng(seed)

    def gradient(self, objective, x, k, reference=None):
        g = np.asarray(objective.grad(x), dtype=float)
        _check_shape(g, x)
        gnorm = np.linalg.norm(project_tangent(x, g).mat)
        direction = random_tangent(x, self.rng, normalize=True).mat
        err = self.delta * gnorm * direction
        return g + err, float(np.linalg.norm(err))

    def describe(self):
        return {"kind": self.kind, "delta": self.delta, "seed": self.seed}


def uniform_perturb(k_true: np.ndarray, k: int, rng=None) -> np.ndarray:
    """Add ``Y / k`` entrywise, ``Y ~ U(0, 1)`` drawn on the upper triangle and mirrored."""
    if k < 1:
        raise ConfigError(f"perturbation index must be >= 1, got {k}")
    k_true = np.asarray(k_true, dtype=float)
    n = k_true.shape[0]
    rng = as_rng(rng)
    iu = np.triu_indices(n)
    y = np.zeros((n, n))
    y[iu] = rng.uniform(0.0, 1.0, size=iu[0].size)
    y = y + np.triu(y, 1).T
    return k_true + y / k


@dataclass(frozen=True)
class PerturbPolicy:
    """Re-draw ``K + Y/k`` at each iteration; streams keyed by ``(seed, k, attempt)``."""

    seed: int = 0

    def perturbed(self, stats: ClassStats, k: int, attempt: int = 0) -> ClassStats:
        rng = np.random.default_rng([self.seed, k, attempt])
        return ClassStats(
            uniform_perturb(stats.k1, k, rng),
            uniform_perturb(stats.k2, k, rng),
            stats.s,
            check=False,
        )


@dataclass
class SurrogateStats(Oracle):
    """Gradient of ``-J`` evaluated with surrogate class statistics.

    With ``refresh=None`` the statistics are used as given (e.g. shrunk sample
    covariances). With a :class:`PerturbPolicy` the statistics are treated as
    the truth and perturbed afresh at every iteration, using index ``k + 1``.
    A perturbation whose channelized covariance is not positive definite is
    re-drawn up to ``MAX_RETRIES`` times.

    Line searches evaluate function values on the same surrogate statistics
    that produced the gradient of that iteration (:meth:`value_objective`).
    """

    stats: ClassStats
    refresh: Optional[PerturbPolicy] = None
    cfg: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    _current: tuple = field(default=(None, None), init=False, repr=False)
    kind = "surrogate"

    def surrogate_at(self, k: int, attempt: int = 0) -> ClassStats:
        if self.refresh is None:
            return self.stats
        return self.refresh.perturbed(self.stats, k + 1, attempt)

    def value_objective(self, objective, k):
        if self.refresh is None:
            return neg_objective(self.stats, self.cfg)
        kk, stats = self._current
        if kk != k:
            raise OracleFailure(f"no surrogate drawn for iteration {k}; call gradient() first")
        return neg_objective(stats, self.cfg)

    def gradient(self, objective, x, k, reference=None):
        attempts = MAX_RETRIES + 1 if self.refresh is not None else 1
        last = None
        for attempt in range(attempts):
            stats = self.surrogate_at(k, attempt)
            try:
                g = -jeffreys_grad_ambient(stats, x)
                break
            except SingularChannelError as err:
                last = err
        else:
            raise OracleFailure(f"surrogate channel not positive definite after {attempts} draws: {last}")
        _check_shape(g, x)
        self._current = (k, stats)
        err_norm = None
        if reference is not None:
            true_g = np.asarray(reference.grad(x), dtype=float)
            err_norm = float(np.linalg.norm(project_tangent(x, g - true_g).mat))
        return g, err_norm

    def describe(self):
        d = {"kind": self.kind, "refresh": "fixed" if self.refresh is None else "uniform"}
        if self.refresh is not None:
            d["seed"] = self.refresh.seed
        return d


def gradient_at(oracle: Oracle, objective: Objective, x: GrassmannPoint, k: int,
                reference: Optional[Objective] = None):
    """Return ``(g_tilde, err_norm)`` for iteration ``k`` (0-based)."""
    if k < 0:
        raise ValueError(f"iteration index must be >= 0, got {k}")
    return oracle.gradient(objective, x, k, reference)

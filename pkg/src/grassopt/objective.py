"""Objectives on Gr(p, n): Jeffrey's divergence between channelized Gaussians
and a Rayleigh-quotient toy problem with a known smoothness constant.

Given class covariances ``K1, K2`` (n x n) and mean difference ``s``, a basis
``X`` (n x p) channelizes them into ``C_i = X^T K_i X`` and ``t = X^T s``. The
symmetrized Kullback-Leibler divergence of the channelized Gaussians is

    J(X) = tr(C2^-1 C1) + tr(C1^-1 C2) + t^T C2^-1 t + t^T C1^-1 t - 2 * dim_offset

with ``dim_offset = p`` making J vanish for identical classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .errors import CovarianceError, DimensionError, SingularChannelError
from .grassmann import GrassmannPoint, as_rng, orthonormalize

SYM_TOL = 1e-10


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _cho(m: np.ndarray, what: str, exc=SingularChannelError):
    try:
        return linalg.cho_factor(m, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as err:
        raise exc(f"{what} is not positive definite: {err}") from err


@dataclass(frozen=True, eq=False)
class ClassStats:
    """Second-order statistics of a two-class discrimination task.

    ``check=False`` skips the positive-definiteness test, which is needed for
    surrogate statistics (perturbed or rank-deficient sample covariances)
    whose channelized versions may still be usable.
    """

    k1: np.ndarray
    k2: np.ndarray
    s: Optional[np.ndarray] = None
    check: bool = True

    def __post_init__(self):
        k1 = np.array(self.k1, dtype=float)
        k2 = np.array(self.k2, dtype=float)
        n = k1.shape[0]
        if k1.shape != (n, n) or k2.shape != (n, n):
            raise DimensionError(f"covariances must be square and equal size: {k1.shape}, {k2.shape}")
        s = np.zeros(n) if self.s is None else np.array(self.s, dtype=float).reshape(-1)
        if s.shape != (n,):
            raise DimensionError(f"mean difference has length {s.size}, expected {n}")
        for name, k in (("k1", k1), ("k2", k2)):
            asym = np.linalg.norm(k - k.T)
            if asym > SYM_TOL * max(1.0, np.linalg.norm(k)):
                raise CovarianceError(f"{name} is not symmetric (|K - K^T|_F = {asym:.3e})")
            if self.check:
                _cho(k, name, CovarianceError)
        for a in (k1, k2, s):
            a.setflags(write=False)
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.k1.shape[0]

    def swapped(self) -> "ClassStats":
        return ClassStats(self.k2, self.k1, self.s, check=False)


@dataclass(frozen=True, eq=False)
class ChannelizedStats:
    """Channel covariances ``c1, c2`` (p x p), channelized mean difference ``ts``."""

    c1: np.ndarray
    c2: np.ndarray
    ts: np.ndarray
    chol1: tuple = field(repr=False, default=None)
    chol2: tuple = field(repr=False, default=None)

    def __post_init__(self):
        if self.chol1 is None:
            object.__setattr__(self, "chol1", _cho(self.c1, "channelized c1"))
        if self.chol2 is None:
            object.__setattr__(self, "chol2", _cho(self.c2, "channelized c2"))

    @property
    def p(self) -> int:
        return self.c1.shape[0]

    def solve1(self, b):
        return linalg.cho_solve(self.chol1, b)

    def solve2(self, b):
        return linalg.cho_solve(self.chol2, b)


@dataclass(frozen=True)
class ObjectiveConfig:
    """``dim_offset`` is the constant subtracted twice in J; ``None`` means p."""

    dim_offset: Optional[float] = None

    def __post_init__(self):
        if self.dim_offset is not None and not np.isfinite(self.dim_offset):
            raise ValueError("dim_offset must be finite")

    def offset_for(self, p: int) -> float:
        return float(p) if self.dim_offset is None else float(self.dim_offset)


def _basis(x) -> np.ndarray:
    if isinstance(x, GrassmannPoint):
        return x.basis
    b = np.asarray(x, dtype=float)
    if b.ndim != 2:
        raise DimensionError(f"expected an n x p basis, got shape {b.shape}")
    return b


def channelize(stats: ClassStats, x) -> ChannelizedStats:
    """Project class statistics through the basis of ``x``.

    ``x`` is normally a :class:`GrassmannPoint`; any full-rank ``n x p`` array is
    also accepted so that invariance under change of basis can be checked.
    """
    b = _basis(x)
    if b.shape[0] != stats.n:
        raise DimensionError(f"basis has {b.shape[0]} rows, statistics have n={stats.n}")
    c1 = _sym(b.T @ stats.k1 @ b)
    c2 = _sym(b.T @ stats.k2 @ b)
    return ChannelizedStats(c1, c2, b.T @ stats.s)


def jeffreys_channelized(ch: ChannelizedStats, dim_offset: float) -> float:
    ts = ch.ts
    return float(
        np.trace(ch.solve2(ch.c1))
        + np.trace(ch.solve1(ch.c2))
        + ts @ ch.solve2(ts)
        + ts @ ch.solve1(ts)
        - 2.0 * dim_offset
    )


def jeffreys(stats: ClassStats, x, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    """Jeffrey's divergence of the two classes after channelizing by ``x``."""
    ch = channelize(stats, x)
    return jeffreys_channelized(ch, cfg.offset_for(ch.p))


def jeffreys_grad_ambient(stats: ClassStats, x) -> np.ndarray:
    """Euclidean derivative of J with respect to the entries of the ``n x p`` basis.

    For ``A_i = C_i^{-1}`` the derivative is

        2 [K1 X A2 - K2 X A2 (C1 + t t^T) A2 + s t^T A2]
      + 2 [K2 X A1 - K1 X A1 (C2 + t t^T) A1 + s t^T A1],

    i.e. twice the transpose of the row-convention expression
    ``C1^-1 T (K2 + s s^T)[I - T^T C1^-1 T K1] + (1 <-> 2)``. The factor two is
    confirmed by the finite-difference tests. All inverses are Cholesky solves.
    """
    b = _basis(x)
    ch = channelize(stats, b)
    t = ch.ts
    tt = np.outer(t, t)
    k1x = stats.k1 @ b
    k2x = stats.k2 @ b

    def half(kx_num, kx_den, c_num, solve):
        # kx_num A - kx_den A (c_num + t t^T) A + s (A t)^T, A = C_den^{-1}
        a_kx = solve(kx_num.T).T
        m = solve(c_num + tt)  # A (c_num + tt)
        a_m_a = solve(m.T).T  # A (c_num + tt) A  (A symmetric)
        return a_kx - kx_den @ a_m_a + np.outer(stats.s, solve(t))

    g = half(k1x, k2x, ch.c1, ch.solve2) + half(k2x, k1x, ch.c2, ch.solve1)
    return 2.0 * g


@dataclass(frozen=True)
class Objective:
    """Minimization objective on Gr(p, n) as a pair of evaluators.

    ``value(x)`` returns f(x) and ``grad(x)`` its ambient (n x p) Euclidean
    derivative; the Riemannian gradient is the tangent projection of the latter.
    ``merit`` optionally reports the figure of merit being maximized (J), and
    ``lipschitz`` a known geodesic smoothness constant.
    """

    value: Callable[[GrassmannPoint], float]
    grad: Callable[[GrassmannPoint], np.ndarray]
    name: str = "objective"
    merit: Optional[Callable[[GrassmannPoint], float]] = None
    lipschitz: Optional[float] = None
    minimum: Optional[float] = None
    stats: Optional[ClassStats] = None


def neg_objective(stats: ClassStats, cfg: ObjectiveConfig = ObjectiveConfig()) -> Objective:
    """Minimization form ``f = -J`` of the divergence maximization."""

    def merit(x):
        return jeffreys(stats, x, cfg)

    return Objective(
        value=lambda x: -merit(x),
        grad=lambda x: -jeffreys_grad_ambient(stats, x),
        name="neg_jeffreys",
        merit=merit,
        stats=stats,
    )


# geodesic smoothness of -tr(X^T A X) is at most 2|A|_2; 4 leaves headroom
RAYLEIGH_LIPSCHITZ_FACTOR = 4.0


def rayleigh_objective(a: np.ndarray, p: Optional[int] = None) -> Objective:
    """``f(X) = -tr(X^T A X)`` for symmetric positive definite ``A``.

    The smoothness constant is taken as ``4 * |A|_2``. When ``p`` is given the
    handle also carries the global minimum, minus the sum of the p largest
    eigenvalues.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"A must be square, got {a.shape}")
    _cho(_sym(a), "A", CovarianceError)
    evals = np.linalg.eigvalsh(_sym(a))
    minimum = None if p is None else -float(np.sum(evals[::-1][:p]))

    def value(x):
        b = _basis(x)
        return -float(np.sum(b * (a @ b)))

    return Objective(
        value=value,
        grad=lambda x: -2.0 * (a @ _basis(x)),
        name="rayleigh",
        lipschitz=RAYLEIGH_LIPSCHITZ_FACTOR * float(evals[-1]),
        minimum=minimum,
    )


def random_spd(n: int, rng=None, spread: float = 1.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues log-uniform in ``[e^-spread, e^spread]``."""
    rng = as_rng(rng)
    q = orthonormalize(rng.standard_normal((n, n)))
    evals = np.exp(rng.uniform(-spread, spread, n))
    return _sym((q * evals) @ q.T)


def random_class_stats(n: int, rng=None, with_mean: bool = False, spread: float = 1.0) -> ClassStats:
    rng = as_rng(rng)
    k1 = random_spd(n, rng, spread)
    k2 = random_spd(n, rng, spread)
    s = rng.standard_normal(n) if with_mean else None
    return ClassStats(k1, k2, s)

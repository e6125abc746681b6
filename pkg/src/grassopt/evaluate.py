"""Baselines and diagnostics: Fukunaga-Koontz optimum, channelized
log-likelihood ratio, Mann-Whitney AUC, log-log rate fits and a
finite-difference gradient check."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import linalg

from .errors import ContractViolation, CovarianceError, NumericalError
from .grassmann import GrassmannPoint, as_rng, exp_map, orthonormalize, project_tangent, random_tangent
from .objective import ChannelizedStats, ClassStats, Objective, channelize


@dataclass(frozen=True, eq=False)
class FkSolution:
    t_star: GrassmannPoint
    gen_eigs: np.ndarray
    j_closed_form: float
    directions: np.ndarray  # selected generalized eigenvectors, K2-orthonormal


def fukunaga_koontz(stats: ClassStats, p: int) -> FkSolution:
    """Optimal p-channel subspace for equal-mean Gaussian classes.

    Solves ``K1 w = lam K2 w`` through the Cholesky factor of ``K2`` and keeps the
    ``p`` eigenvectors with the largest ``lam + 1/lam`` (ties go to the larger
    ``lam``). In that basis both channel covariances are diagonal, so the
    divergence is ``sum(lam_j + 1/lam_j) - 2p``.
    """
    if np.any(stats.s != 0):
        raise ContractViolation("no closed-form optimum for nonzero mean difference")
    if not 1 <= p < stats.n:
        raise ContractViolation(f"need 1 <= p < n, got p={p}, n={stats.n}")
    try:
        l2 = linalg.cholesky(stats.k2, lower=True)
        whitened = linalg.solve_triangular(
            l2, linalg.solve_triangular(l2, stats.k1, lower=True).T, lower=True
        )
        lam, u = np.linalg.eigh(0.5 * (whitened + whitened.T))
    except (linalg.LinAlgError, np.linalg.LinAlgError) as err:
        raise NumericalError(f"generalized eigenproblem failed: {err}") from err
    if lam[0] <= 0:
        raise CovarianceError("K1 is not positive definite")
    score = np.round(lam + 1.0 / lam, 12)
    order = np.lexsort((-lam, -score))[:p]
    w = linalg.solve_triangular(l2, u[:, order], lower=True, trans="T")
    sel = lam[order]
    return FkSolution(
        t_star=GrassmannPoint(orthonormalize(w), check=False),
        gen_eigs=sel,
        j_closed_form=float(np.sum(sel + 1.0 / sel) - 2 * p),
        directions=w,
    )


def _logdet(chol) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol[0]))))


def log_likelihood_ratio(ch: ChannelizedStats, means, v) -> np.ndarray:
    """Gaussian log-likelihood ratio (times two) favoring class 1.

    ``(v - m2)^T C2^-1 (v - m2) - (v - m1)^T C1^-1 (v - m1) + ln det C2 - ln det C1``.
    ``v`` may be a single p-vector or an ``(N, p)`` array of channel outputs.
    """
    m1, m2 = (np.asarray(m, dtype=float) for m in means)
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    vv = np.atleast_2d(v)
    d1 = vv - m1
    d2 = vv - m2
    q1 = np.sum(d1 * ch.solve1(d1.T).T, axis=1)
    q2 = np.sum(d2 * ch.solve2(d2.T).T, axis=1)
    out = q2 - q1 + _logdet(ch.chol2) - _logdet(ch.chol1)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class RocResult:
    auc: float
    n_pos: int
    n_neg: int
    exact: Fraction = None


def auc(scores_class1, scores_class2) -> RocResult:
    """Mann-Whitney estimate of P(score1 > score2), ties counted one half.

    Counts are accumulated in integers (twice the U statistic) using binary
    search on the sorted class-2 scores, so the result is exact before the
    final conversion to float.
    """
    s1 = np.asarray(scores_class1, dtype=float).ravel()
    s2 = np.sort(np.asarray(scores_class2, dtype=float).ravel())
    if s1.size == 0 or s2.size == 0:
        raise ValueError("both score sets must be nonempty")
    if np.isnan(s1).any() or np.isnan(s2).any():
        raise ValueError("scores contain NaN")
    below = np.searchsorted(s2, s1, side="left")
    at_or_below = np.searchsorted(s2, s1, side="right")
    twice_u = int(np.sum(2 * below.astype(np.int64) + (at_or_below - below)))
    frac = Fraction(twice_u, 2 * s1.size * s2.size)
    return RocResult(float(frac), int(s1.size), int(s2.size), frac)


def rate_fit(k, values, k_min=None, k_max=None) -> float:
    """Least-squares slope of ``log(value)`` against ``log(k)`` on ``[k_min, k_max]``."""
    k = np.asarray(k, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = np.ones(k.shape, dtype=bool)
    if k_min is not None:
        mask &= k >= k_min
    if k_max is not None:
        mask &= k <= k_max
    k, values = k[mask], values[mask]
    if k.size < 10:
        raise ValueError(f"need at least 10 points in range, got {k.size}")
    if np.any(values <= 0) or np.any(k <= 0):
        raise ValueError("rate fit needs positive k and values")
    slope, _ = np.polyfit(np.log(k), np.log(values), 1)
    return float(slope)


def fd_gradient_check(objective: Objective, x: GrassmannPoint, m: int = 5, h: float = 1e-5,
                      rng=None) -> float:
    """Largest relative mismatch between analytic and central-difference slopes.

    For ``m`` random unit tangent directions ``v`` compares ``<P(grad f), v>`` with
    ``(f(Exp(x, h v)) - f(Exp(x, -h v))) / (2h)`` and returns the maximum of
    ``|analytic - numeric| / (1 + |numeric|)``.
    """
    if not h > 0 or m < 1:
        raise ValueError("need h > 0 and m >= 1")
    rng = as_rng(rng)
    g = project_tangent(x, objective.grad(x)).mat
    worst = 0.0
    for _ in range(m):
        v = random_tangent(x, rng, normalize=True)
        numeric = (objective.value(exp_map(x, v, h)) - objective.value(exp_map(x, v, -h))) / (2 * h)
        analytic = float(np.sum(g * v.mat))
        worst = max(worst, abs(analytic - numeric) / (1.0 + abs(numeric)))
    return worst


def fk_visualization(stats: ClassStats, x: GrassmannPoint, count: int = 5) -> np.ndarray:
    """Leading eigenvectors of ``C2^-1 C1`` at ``x`` mapped back to pixel space.

    Eigenvectors ``w`` of the channel ratio matrix are returned as columns
    ``basis @ w``, ordered by decreasing ``lam + 1/lam``.
    """
    b = x.basis
    c1 = b.T @ stats.k1 @ b
    c2 = b.T @ stats.k2 @ b
    lam, w = linalg.eigh(0.5 * (c1 + c1.T), 0.5 * (c2 + c2.T))
    order = np.argsort(-(lam + 1.0 / lam), kind="stable")[:count]
    return b @ w[:, order]


def channel_scores(stats: ClassStats, x: GrassmannPoint, images1, images2):
    """LLR scores of two image sets, using the true channel statistics at ``x``."""
    ch = channelize(stats, x)
    # class 1 carries the mean difference, class 2 is centered
    means = (x.basis.T @ stats.s, np.zeros(x.p))
    v1 = np.asarray(images1) @ x.basis
    v2 = np.asarray(images2) @ x.basis
    return log_likelihood_ratio(ch, means, v1), log_likelihood_ratio(ch, means, v2)


"""Geometry of the Grassmann manifold Gr(p, n).

A point is stored as an ``n x p`` matrix with orthonormal columns whose span
is the subspace. The row-convention channelizing matrix used by the imaging
code is simply ``point.basis.T`` (see :attr:`GrassmannPoint.rows`).

Tangent vectors at ``X`` are ``n x p`` matrices ``A`` with ``X.T @ A = 0``;
the metric is the trace inner product ``tr(A.T @ B)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DimensionError

# self-produced values are held to ORTHO_TOL, user input to INPUT_TOL
ORTHO_TOL = 1e-10
INPUT_TOL = 1e-8


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def as_rng(rng) -> np.random.Generator:
    """Return a ``numpy.random.Generator`` for a seed, generator or ``None``."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def orthonormalize(mat: np.ndarray) -> np.ndarray:
    """Thin QR factor of ``mat`` with the diagonal of R forced nonnegative."""
    q, r = np.linalg.qr(mat)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True, eq=False)
class GrassmannPoint:
    """A p-dimensional subspace of R^n held as an orthonormal ``n x p`` basis.

    Parameters
    ----------
    basis : array_like, shape (n, p)
        Column-orthonormal matrix, ``basis.T @ basis = I_p``.
    check : bool
        Verify orthonormality on construction (tolerance ``1e-8``).
    """

    basis: np.ndarray
    check: bool = True

    def __post_init__(self):
        b = _frozen(self.basis)
        if b.ndim != 2:
            raise DimensionError(f"basis must be 2-D, got shape {b.shape}")
        n, p = b.shape
        if not 1 <= p < n:
            raise DimensionError(f"need 1 <= p < n, got n={n}, p={p}")
        if self.check:
            resid = np.linalg.norm(b.T @ b - np.eye(p))
            if resid > INPUT_TOL:
                raise ContractViolation(
                    f"basis is not orthonormal (|B^T B - I|_F = {resid:.3e})"
                )
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_matrix(cls, mat) -> "GrassmannPoint":
        """Point spanned by the columns of an arbitrary full-rank ``n x p`` matrix."""
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2:
            raise DimensionError(f"expected a 2-D matrix, got shape {mat.shape}")
        return cls(orthonormalize(mat))

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def p(self) -> int:
        return self.basis.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.basis.shape

    @property
    def rows(self) -> np.ndarray:
        """The ``p x n`` channelizing matrix with orthonormal rows."""
        return self.basis.T

    def orthonormality_error(self) -> float:
        return float(np.linalg.norm(self.basis.T @ self.basis - np.eye(self.p)))


@dataclass(frozen=True, eq=False)
class TangentVector:
    """An ``n x p`` matrix tangent to the Grassmannian at ``base``."""

    mat: np.ndarray
    base: GrassmannPoint
    check: bool = True

    def __post_init__(self):
        m = _frozen(self.mat)
        if m.shape != self.base.shape:
            raise DimensionError(
                f"tangent shape {m.shape} does not match base point {self.base.shape}"
            )
        if self.check:
            resid = tangency_residual(self.base, m)
            if resid > INPUT_TOL * max(1.0, float(np.linalg.norm(m))):
                raise ContractViolation(
                    f"matrix is not tangent at the base point (|X^T A|_F = {resid:.3e})"
                )
        object.__setattr__(self, "mat", m)

    def __mul__(self, c: float) -> "TangentVector":
        return TangentVector(c * self.mat, self.base, check=False)

    __rmul__ = __mul__

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self.base, other.base)
        return TangentVector(self.mat + other.mat, self.base, check=False)

    def __neg__(self) -> "TangentVector":
        return TangentVector(-self.mat, self.base, check=False)


def tangency_residual(x: GrassmannPoint, mat) -> float:
    return float(np.linalg.norm(x.basis.T @ np.asarray(mat, dtype=float)))


def _same_base(x: GrassmannPoint, y: GrassmannPoint):
    if x is y:
        return
    if x.shape != y.shape or not np.array_equal(x.basis, y.basis):
        raise ContractViolation("tangent vectors live at different base points")


def project_tangent(x: GrassmannPoint, g) -> TangentVector:
    """Orthogonal projection of an ambient ``n x p`` matrix onto the tangent space.

    Returns ``(I - X X^T) g``, the tangent vector closest to ``g`` in Frobenius norm.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != x.shape:
        raise DimensionError(f"ambient matrix shape {g.shape} != point shape {x.shape}")
    b = x.basis
    return TangentVector(g - b @ (b.T @ g), x, check=False)


def exp_map(x: GrassmannPoint, v: TangentVector, t: float = 1.0) -> GrassmannPoint:
    """Follow the geodesic from ``x`` with initial velocity ``t * v``.

    With the thin SVD ``v = U S W^T`` the endpoint is spanned by
    ``X W cos(tS) W^T + U sin(tS) W^T``; the result is re-orthonormalized by QR.
    Descent steps pass a negative ``t``.
    """
    _same_base(x, v.base)
    if not np.isfinite(t):
        raise ContractViolation(f"step must be finite, got {t}")
    resid = tangency_residual(x, v.mat)
    if resid > INPUT_TOL * max(1.0, float(np.linalg.norm(v.mat))):
        raise ContractViolation(f"direction is not tangent (|X^T v|_F = {resid:.3e})")
    if t == 0 or not np.any(v.mat):
        return x
    u, s, wt = np.linalg.svd(v.mat, full_matrices=False)
    y = (x.basis @ wt.T) * np.cos(t * s) @ wt + (u * np.sin(t * s)) @ wt
    return GrassmannPoint(orthonormalize(y), check=False)


def inner(x: GrassmannPoint, a: TangentVector, b: TangentVector) -> float:
    """Canonical metric ``tr(a^T b)``."""
    _same_base(x, a.base)
    _same_base(x, b.base)
    return float(np.sum(a.mat * b.mat))


def norm(x: GrassmannPoint, a: TangentVector) -> float:
    _same_base(x, a.base)
    return float(np.linalg.norm(a.mat))


def random_point(n: int, p: int, rng=None) -> GrassmannPoint:
    """Uniformly distributed subspace: QR of an ``n x p`` standard normal matrix."""
    if not 1 <= p < n:
        raise DimensionError(f"need 1 <= p < n, got n={n}, p={p}")
    rng = as_rng(rng)
    return GrassmannPoint(orthonormalize(rng.standard_normal((n, p))), check=False)


def random_tangent(x: GrassmannPoint, rng=None, normalize: bool = False) -> TangentVector:
    """Projected standard normal direction at ``x``; unit norm if ``normalize``."""
    rng = as_rng(rng)
    v = project_tangent(x, rng.standard_normal(x.shape))
    if normalize:
        v = v * (1.0 / np.linalg.norm(v.mat))
    return v


def principal_angles(x: GrassmannPoint, y: GrassmannPoint) -> np.ndarray:
    """Principal angles between two subspaces, ascending.

    Cosines come from ``svd(X^T Y)`` and sines from ``svd((I - X X^T) Y)``;
    combining them with ``arctan2`` stays accurate for tiny angles, where
    ``arccos`` alone loses half the significant digits.
    """
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    cos = np.linalg.svd(x.basis.T @ y.basis, compute_uv=False)
    resid = y.basis - x.basis @ (x.basis.T @ y.basis)
    sin = np.linalg.svd(resid, compute_uv=False)[: x.p]
    cos = np.clip(cos, 0.0, 1.0)
    sin = np.clip(np.sort(sin), 0.0, 1.0)
    return np.arctan2(sin, cos)


def subspace_distance(x: GrassmannPoint, y: GrassmannPoint) -> float:
    """Geodesic distance ``sqrt(sum theta_i^2)`` over principal angles."""
    return float(np.linalg.norm(principal_angles(x, y)))

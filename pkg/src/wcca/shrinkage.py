"""Shrinkage correlation estimation in implicit low-rank form.

The estimator shrinks the empirical correlation matrix ``R_emp`` toward the
identity, ``R = (1 - lam) R_emp + lam I``, with the analytic optimal intensity
``lam = sum_{i!=j} Var(r_ij) / sum_{i!=j} r_ij^2`` (clamped to [0, 1]).

For ``n`` samples the shrunken matrix is held as ``lam (I + U diag(N) U^T)``
with ``U`` of shape ``(p, n')``, ``n' <= n - 1``, so products with ``R^{1/2}``
and ``R^{-1/2}`` cost ``O(p n d)`` after an ``O(n^2 p)`` setup and never
form a ``p x p`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumnError,
    DimensionError,
    InsufficientDataError,
    SingularityError,
    ValidationError,
)

SINGULAR_RTOL = 1e-12


def standardize(data, names=None):
    """Center columns and scale them to unit (unbiased) sample variance.

    Returns
    -------
    z : ndarray, shape (n, p)
    mean, sd : ndarray, shape (p,)

    Raises
    ------
    ConstantColumnError
        Naming the first column whose sample variance is zero.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValidationError(f"data must be 2-d, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("data contains missing or non-finite values")
    n = data.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 rows, got {n}")
    mean = data.mean(axis=0)
    centered = data - mean
    sd = np.sqrt(np.einsum("ij,ij->j", centered, centered) / (n - 1))
    # relative test: a column of identical values leaves only rounding noise
    scale = np.maximum(np.abs(mean), 1.0)
    bad = np.flatnonzero(sd <= 1e-13 * scale)
    if bad.size:
        col = int(bad[0])
        raise ConstantColumnError(col, None if names is None else names[col])
    return centered / sd, mean, sd


def shrinkage_intensity(z):
    """Optimal shrinkage intensity toward the identity for standardized data.

    Uses the unbiased estimate of the variance of each empirical correlation,
    ``Var(r_ij) = n / (n-1)^3 * sum_k (w_kij - mean_k w_kij)^2`` with
    ``w_kij = z_ki z_kj``.  Pairwise sums are reduced through Gram matrices,
    so the cost is ``O(n p min(n, p))``.
    """
    z = np.asarray(z, dtype=float)
    n, p = z.shape
    gram = z @ z.T if n <= p else z.T @ z
    col_ss = np.einsum("ij,ij->j", z, z)
    # sum_{i!=j} (sum_k z_ki z_kj)^2
    cross_off = np.sum(gram * gram) - np.sum(col_ss**2)
    if cross_off <= 0:
        return 1.0
    z2 = z * z
    # sum_{i!=j} sum_k z_ki^2 z_kj^2
    fourth_off = np.sum(np.sum(z2, axis=1) ** 2) - np.sum(z2 * z2)
    lam = n * (fourth_off - cross_off / n) / ((n - 1) * cross_off)
    return float(min(1.0, max(0.0, lam)))


@dataclass(frozen=True)
class ShrinkageCorrelation:
    """Correlation matrix ``shrink_lambda * (I + U diag(N) U^T)``.

    ``U`` has orthonormal columns; ``N`` holds the diagonal of the
    ``n' x n'`` middle matrix as a vector.
    """

    shrink_lambda: float
    U: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        N = np.asarray(self.N, dtype=float).ravel()
        if U.ndim != 2 or U.shape[1] != N.size:
            raise DimensionError(f"U of shape {U.shape} does not match N of size {N.size}")
        if not 0 < self.shrink_lambda <= 1:
            raise SingularityError(
                "implicit form needs shrink_lambda in (0, 1]; use the dense path "
                "for unshrunken correlations"
            )
        if np.any(1 + N <= 0):
            raise ValidationError("I + N must be positive definite")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "shrink_lambda", float(self.shrink_lambda))
        if not np.allclose(self.diagonal(), 1.0, atol=1e-8):
            raise ValidationError("represented matrix does not have unit diagonal")

    @classmethod
    def from_standardized(cls, z, shrink_lambda):
        """Factor ``(1 - lam) z^T z / (n-1) + lam I`` without forming it."""
        z = np.asarray(z, dtype=float)
        n = z.shape[0]
        _, s, vt = np.linalg.svd(z / np.sqrt(n - 1), full_matrices=False)
        keep = s > SINGULAR_RTOL * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
        s, vt = s[keep], vt[keep]
        lam = float(shrink_lambda)
        if lam == 0.0:
            raise SingularityError(
                "zero shrinkage gives no implicit form; use the dense path"
            )
        return cls(lam, vt.T, (1 - lam) / lam * s**2)

    @property
    def p(self):
        return self.U.shape[0]

    @property
    def n_effective(self):
        return self.U.shape[1]

    def diagonal(self):
        return self.shrink_lambda * (1 + (self.U**2) @ self.N)

    def dense(self):
        """Materialize the ``p x p`` matrix (for small problems and tests)."""
        out = (self.U * self.N) @ self.U.T
        out[np.diag_indices_from(out)] += 1
        return self.shrink_lambda * out

    def power_product(self, M, power):
        """``R^power @ M`` using only ``p x n'`` and ``n' x d`` intermediates."""
        M = np.asarray(M, dtype=float)
        vector = M.ndim == 1
        if vector:
            M = M[:, None]
        if M.ndim != 2 or M.shape[0] != self.p:
            raise DimensionError(f"M must have {self.p} rows, got shape {M.shape}")
        middle = 1 - (1 + self.N) ** power
        out = self.shrink_lambda**power * (M - self.U @ (middle[:, None] * (self.U.T @ M)))
        return out[:, 0] if vector else out


def estimate_shrinkage_correlation(data, shrink_lambda=None):
    """Shrinkage estimate of the correlation matrix of ``data``.

    Parameters
    ----------
    data : array_like, shape (n, p)
    shrink_lambda : float, optional
        Fixed intensity in (0, 1]; estimated from the data when omitted.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValidationError(f"data must be 2-d, got shape {data.shape}")
    if data.shape[0] < 3:
        raise InsufficientDataError(f"need at least 3 rows, got {data.shape[0]}")
    z, _, _ = standardize(data)
    lam = shrinkage_intensity(z) if shrink_lambda is None else float(shrink_lambda)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"shrink_lambda must lie in [0, 1], got {lam}")
    return ShrinkageCorrelation.from_standardized(z, lam)


def inv_sqrt_product(R, M):
    """``R^{-1/2} @ M`` for a :class:`ShrinkageCorrelation` ``R``."""
    return R.power_product(M, -0.5)


def sqrt_product(R, M):
    """``R^{1/2} @ M`` for a :class:`ShrinkageCorrelation` ``R``."""
    return R.power_product(M, 0.5)

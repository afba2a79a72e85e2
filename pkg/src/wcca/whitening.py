"""Whitening and coloring transforms based on correlation matrices.

Every whitening matrix for a random vector with correlation ``Rho`` and
variances ``V`` has the form ``W = Q Rho^{-1/2} V^{-1/2}`` for some
(semi-)orthogonal rotation ``Q``.  ``Q = I`` gives ZCA-cor whitening,
``Q = G^T`` (eigenvectors of ``Rho``) gives PCA-cor whitening, and the
rotations obtained from the SVD of the correlation-adjusted cross-correlation
give CCA whitening.

All matrices are dense numpy arrays in row-major (C) order.  Data matrices
have one observation per row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularityError, ValidationError

# eigenvalues at or below this fraction of the largest one count as zero
EIGEN_RTOL = 1e-12
# diagonal entries of a rotation below this magnitude do not define a sign
ZERO_DIAGONAL_TOL = 1e-12


def _as_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def _check_symmetric(a, name, tol=1e-10):
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > tol * scale:
        raise ValidationError(f"{name} is not symmetric")


def _symmetric_power(vecs, vals, power):
    out = (vecs * vals**power) @ vecs.T
    return (out + out.T) / 2


def matrix_sqrt_inv_sym(R, rtol=EIGEN_RTOL):
    """Square root and inverse square root of a symmetric positive-definite matrix.

    Both roots come from a single symmetric eigendecomposition
    ``R = G diag(theta) G^T``.

    Parameters
    ----------
    R : array_like, shape (p, p)
        Symmetric positive-definite matrix.
    rtol : float
        Eigenvalues ``<= rtol * max(theta)`` are treated as zero and rejected.

    Returns
    -------
    sqrt, inv_sqrt : ndarray, shape (p, p)
        Symmetric matrices with ``sqrt @ sqrt = R`` and ``inv_sqrt @ sqrt = I``.

    Raises
    ------
    ValidationError
        If ``R`` is not a finite symmetric matrix.
    SingularityError
        If an eigenvalue falls at or below the relative floor.  Regularize with
        a shrinkage estimate instead of clipping.
    """
    R = _as_matrix(R, "R")
    _check_symmetric(R, "R")
    vals, vecs = np.linalg.eigh((R + R.T) / 2)
    top = vals[-1] if vals.size else 1.0
    if vals.size and (top <= 0 or vals[0] <= rtol * top):
        raise SingularityError(
            f"matrix is not positive definite: eigenvalue {vals[0]:.6g} "
            f"(largest {top:.6g}); use a shrinkage estimate",
            eigenvalue=float(vals[0]),
        )
    return _symmetric_power(vecs, vals, 0.5), _symmetric_power(vecs, vals, -0.5)


def positive_diagonal_signs(Q):
    """Row signs that make the leading diagonal of ``Q`` nonnegative.

    For a row whose diagonal entry is (numerically) zero, the sign of the
    largest-magnitude entry in that row is used instead.  Returns a vector of
    ``+1.0``/``-1.0`` with one entry per row of ``Q``.
    """
    Q = np.asarray(Q, dtype=float)
    m = Q.shape[0]
    signs = np.ones(m)
    for i in range(m):
        d = Q[i, i] if i < Q.shape[1] else 0.0
        if abs(d) < ZERO_DIAGONAL_TOL:
            d = Q[i, np.argmax(np.abs(Q[i]))]
        if d < 0:
            signs[i] = -1.0
    return signs


class WhiteningMethod(str, enum.Enum):
    ZCA_COR = "ZCA-cor"
    PCA_COR = "PCA-cor"
    CCA = "CCA"


class Block(str, enum.Enum):
    X = "X-block"
    Y = "Y-block"


@dataclass(frozen=True)
class WhiteningSpec:
    method: WhiteningMethod = WhiteningMethod.ZCA_COR
    target: Block = Block.X

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", WhiteningMethod(self.method))
            object.__setattr__(self, "target", Block(self.target))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


@dataclass(frozen=True)
class WhiteningResult:
    """Whitening matrix ``W`` with its rotation, loadings and correlation loadings.

    ``W`` maps a (centered) column vector ``x`` to ``W x``; for row-wise data
    the whitened matrix is ``(X - mean) @ W.T``.
    """

    whitening_matrix: np.ndarray
    rotation: np.ndarray
    loadings: np.ndarray
    cor_loadings: np.ndarray

    @property
    def coloring_matrix(self):
        """``Phi^T``, the inverse of ``W`` when the rotation is square."""
        return self.loadings.T


@dataclass(frozen=True)
class DatasetSummary:
    """First and second moments of a paired data set ``(X, Y)``.

    Covariances are held in the factored form ``Sigma = V^{1/2} Rho V^{1/2}``.
    """

    mean_x: np.ndarray
    mean_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    cor_x: np.ndarray
    cor_y: np.ndarray
    cross_cor: np.ndarray
    n_samples: int = 0

    def __post_init__(self):
        for name in ("mean_x", "mean_y", "var_x", "var_y"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, v)
        for name in ("cor_x", "cor_y", "cross_cor"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        p, q = self.mean_x.size, self.mean_y.size
        if self.var_x.size != p or self.cor_x.shape != (p, p):
            raise DimensionError(f"X-block parts disagree with p={p}")
        if self.var_y.size != q or self.cor_y.shape != (q, q):
            raise DimensionError(f"Y-block parts disagree with q={q}")
        if self.cross_cor.shape != (p, q):
            raise DimensionError(
                f"cross_cor has shape {self.cross_cor.shape}, expected {(p, q)}"
            )
        if np.any(self.var_x <= 0) or np.any(self.var_y <= 0):
            raise ValidationError("variances must be strictly positive")
        for name in ("cor_x", "cor_y"):
            c = getattr(self, name)
            _check_symmetric(c, name)
            if not np.allclose(np.diag(c), 1.0, atol=1e-10):
                raise ValidationError(f"{name} must have unit diagonal")
        for name in ("cor_x", "cor_y", "cross_cor"):
            if np.max(np.abs(getattr(self, name)), initial=0.0) > 1 + 1e-10:
                raise ValidationError(f"{name} has entries outside [-1, 1]")

    @classmethod
    def from_data(cls, x, y, shrink_lambda=0.0):
        """Moments of paired data with optional correlation shrinkage.

        Means and variances are the empirical (unbiased) estimates; the joint
        correlation matrix is ``(1 - shrink_lambda) R + shrink_lambda I``
        where ``R`` is the empirical correlation of ``[x, y]``.
        """
        from .shrinkage import standardize

        x = _as_matrix(x, "x")
        y = _as_matrix(y, "y")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(
                f"x has {x.shape[0]} rows but y has {y.shape[0]}"
            )
        if not 0.0 <= shrink_lambda <= 1.0:
            raise ValidationError("shrink_lambda must lie in [0, 1]")
        p = x.shape[1]
        z, mean, sd = standardize(np.hstack([x, y]))
        n = z.shape[0]
        cor = (1 - shrink_lambda) * (z.T @ z) / (n - 1)
        np.fill_diagonal(cor, 1.0)
        cor = (cor + cor.T) / 2
        return cls(
            mean_x=mean[:p],
            mean_y=mean[p:],
            var_x=sd[:p] ** 2,
            var_y=sd[p:] ** 2,
            cor_x=cor[:p, :p],
            cor_y=cor[p:, p:],
            cross_cor=cor[:p, p:],
            n_samples=n,
        )

    @classmethod
    def from_covariance(cls, cov_x, cov_y, cross_cov, mean_x=None, mean_y=None):
        """Population summary from covariance blocks."""
        cov_x = _as_matrix(cov_x, "cov_x")
        cov_y = _as_matrix(cov_y, "cov_y")
        cross_cov = _as_matrix(cross_cov, "cross_cov")
        sx = np.sqrt(np.diag(cov_x))
        sy = np.sqrt(np.diag(cov_y))
        p, q = sx.size, sy.size
        return cls(
            mean_x=np.zeros(p) if mean_x is None else mean_x,
            mean_y=np.zeros(q) if mean_y is None else mean_y,
            var_x=sx**2,
            var_y=sy**2,
            cor_x=cov_x / np.outer(sx, sx),
            cor_y=cov_y / np.outer(sy, sy),
            cross_cor=cross_cov / np.outer(sx, sy),
        )

    @property
    def p(self):
        return self.mean_x.size

    @property
    def q(self):
        return self.mean_y.size

    @property
    def cov_x(self):
        s = np.sqrt(self.var_x)
        return self.cor_x * np.outer(s, s)

    @property
    def cov_y(self):
        s = np.sqrt(self.var_y)
        return self.cor_y * np.outer(s, s)

    @property
    def cross_cov(self):
        return self.cross_cor * np.outer(np.sqrt(self.var_x), np.sqrt(self.var_y))

    @property
    def joint_cor(self):
        """The composite ``(p+q) x (p+q)`` correlation matrix."""
        return np.block([[self.cor_x, self.cross_cor], [self.cross_cor.T, self.cor_y]])

    def block(self, target):
        """``(cor, var)`` for one block."""
        if Block(target) is Block.X:
            return self.cor_x, self.var_x
        return self.cor_y, self.var_y


def zca_cor_rotation(p):
    return np.eye(p)


def pca_cor_rotation(Rho):
    """Rotation ``Q = G^T`` for PCA-cor whitening.

    Eigenpairs of ``Rho`` are ordered by descending eigenvalue.  Within a group
    of tied eigenvalues (relative gap below ``1e-12``), eigenvectors are first
    normalized so their first nonzero entry is positive, then ordered
    lexicographically descending.  Finally the rows of ``Q`` are sign-flipped
    to give a nonnegative diagonal.
    """
    Rho = _as_matrix(Rho, "Rho")
    _check_symmetric(Rho, "Rho")
    vals, vecs = np.linalg.eigh((Rho + Rho.T) / 2)
    if vals.size and vals[0] <= EIGEN_RTOL * vals[-1]:
        raise SingularityError(
            f"correlation matrix is not positive definite: eigenvalue {vals[0]:.6g}",
            eigenvalue=float(vals[0]),
        )
    G = vecs.T.copy()
    for row in G:
        nz = np.flatnonzero(np.abs(row) > ZERO_DIAGONAL_TOL)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    tol = EIGEN_RTOL * max(abs(vals[-1]), 1.0) if vals.size else 0.0
    groups = []
    for k in np.argsort(-vals, kind="stable"):
        if groups and vals[groups[-1][0]] - vals[k] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    order = [
        k for g in groups for k in sorted(g, key=lambda k: tuple(-np.round(G[k], 12)))
    ]
    Q = G[order]
    return Q * positive_diagonal_signs(Q)[:, None]


def block_whitening(cor, var, rotation):
    """Whitening matrix, loadings and correlation loadings for one block.

    Parameters
    ----------
    cor : array_like, shape (p, p)
        Correlation matrix ``Rho``.
    var : array_like, shape (p,)
        Variances (diagonal of ``V``).
    rotation : array_like, shape (m, p)
        Semi-orthogonal ``Q`` with ``m <= p``.
    """
    cor = _as_matrix(cor, "cor")
    var = np.asarray(var, dtype=float).ravel()
    Q = _as_matrix(rotation, "rotation")
    p = cor.shape[0]
    if Q.shape[1] != p or Q.shape[0] > p or var.size != p:
        raise DimensionError(
            f"rotation of shape {Q.shape} does not fit a {p}x{p} correlation matrix"
        )
    sqrt_r, inv_sqrt_r = matrix_sqrt_inv_sym(cor)
    sd = np.sqrt(var)
    psi = Q @ sqrt_r
    return WhiteningResult(
        whitening_matrix=(Q @ inv_sqrt_r) / sd,
        rotation=Q,
        loadings=psi * sd,
        cor_loadings=psi,
    )


def whitening_matrix(summary, spec=WhiteningSpec(), Q=None):
    """Whiten one block of ``summary``.

    When ``Q`` is omitted it is derived from ``spec.method``: the identity for
    ZCA-cor, correlation eigenvectors for PCA-cor, and the CCA rotation of the
    requested block for CCA.
    """
    spec = spec if isinstance(spec, WhiteningSpec) else WhiteningSpec(*spec)
    cor, var = summary.block(spec.target)
    if Q is None:
        if spec.method is WhiteningMethod.ZCA_COR:
            Q = zca_cor_rotation(cor.shape[0])
        elif spec.method is WhiteningMethod.PCA_COR:
            Q = pca_cor_rotation(cor)
        else:
            if not isinstance(summary, DatasetSummary):
                raise ValidationError("CCA whitening needs a paired DatasetSummary")
            from .cca import cca_decompose, compute_k

            qx, qy, _ = cca_decompose(compute_k(summary))
            Q = qx if spec.target is Block.X else qy
    return block_whitening(cor, var, Q)

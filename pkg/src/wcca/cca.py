"""Canonical correlation analysis as a whitening transformation.

CCA whitening picks the rotations ``Q_X`` and ``Q_Y`` from the SVD of the
correlation-adjusted cross-correlation ``K = Rho_X^{-1/2} Rho_XY Rho_Y^{-1/2}``
so that the whitened blocks have diagonal cross-correlation.  Both rotations
are sign-normalized to a nonnegative diagonal, which pushes the signs onto the
canonical correlations: they are signed regression coefficients between the
CCA-whitened blocks and may be negative.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumnError,
    DimensionError,
    InsufficientDataError,
    SingularityError,
    ValidationError,
)
from .shrinkage import (
    ShrinkageCorrelation,
    inv_sqrt_product,
    shrinkage_intensity,
    sqrt_product,
    standardize,
)
from .whitening import (
    DatasetSummary,
    block_whitening,
    matrix_sqrt_inv_sym,
    positive_diagonal_signs,
)

_SHRINKAGE_HINT = "the correlation estimate is singular; fit with shrinkage"


@dataclass(frozen=True)
class CcaModel:
    """A fitted CCA whitening.

    Rows of ``directions_x`` / ``directions_y`` are the canonical directions.
    They act on data in *model units*: centered by ``mean_x`` and, when
    ``scaled`` is true, divided by ``sd_x`` (see :meth:`model_units`).
    """

    lambdas: np.ndarray
    rotation_x: np.ndarray
    rotation_y: np.ndarray
    directions_x: np.ndarray
    directions_y: np.ndarray
    loadings_x: np.ndarray
    loadings_y: np.ndarray
    cor_loadings_x: np.ndarray
    cor_loadings_y: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    sd_x: np.ndarray
    sd_y: np.ndarray
    scaled: bool = True
    shrink_lambda: float | None = None
    n_samples: int = 0

    @property
    def p(self):
        return self.mean_x.size

    @property
    def q(self):
        return self.mean_y.size

    @property
    def m(self):
        return self.lambdas.size

    @property
    def var_x(self):
        """Variances of the model-unit X variables."""
        return np.ones(self.p) if self.scaled else self.sd_x**2

    @property
    def var_y(self):
        return np.ones(self.q) if self.scaled else self.sd_y**2

    def model_units(self, x, y):
        """Center (and for scaled models standardize) data with the fitted moments."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.p:
            raise DimensionError(f"x must have {self.p} columns, got shape {x.shape}")
        if y.ndim != 2 or y.shape[1] != self.q:
            raise DimensionError(f"y must have {self.q} columns, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        x = x - self.mean_x
        y = y - self.mean_y
        if self.scaled:
            x = x / self.sd_x
            y = y / self.sd_y
        return x, y


def compute_k(summary):
    """Dense ``K = Rho_X^{-1/2} Rho_XY Rho_Y^{-1/2}`` from a :class:`DatasetSummary`."""
    try:
        _, ix = matrix_sqrt_inv_sym(summary.cor_x)
        _, iy = matrix_sqrt_inv_sym(summary.cor_y)
    except SingularityError as exc:
        raise SingularityError(f"{_SHRINKAGE_HINT} ({exc})", exc.eigenvalue) from exc
    return ix @ summary.cross_cor @ iy


def compute_k_lowrank(cor_x, cor_y, zx, zy):
    """``K`` for blocks of one joint shrinkage estimate, in implicit form.

    ``cor_x`` and ``cor_y`` are the :class:`ShrinkageCorrelation` blocks built
    from the standardized data ``zx`` and ``zy`` with a common intensity; the
    shrunken cross-correlation is ``(1 - lam) zx^T zy / (n - 1)``.
    """
    lam = cor_x.shrink_lambda
    if cor_y.shrink_lambda != lam:
        raise ValidationError("both blocks must share one shrinkage intensity")
    n = zx.shape[0]
    ax = inv_sqrt_product(cor_x, zx.T)
    ay = inv_sqrt_product(cor_y, zy.T)
    return (1 - lam) / (n - 1) * (ax @ ay.T)


def cca_decompose(K):
    """Signed SVD ``K = Q_X^T diag(lambdas) Q_Y``.

    Returns
    -------
    rotation_x : ndarray, shape (m, p)
    rotation_y : ndarray, shape (m, q)
    lambdas : ndarray, shape (m,)
        Ordered by descending magnitude; ties keep the SVD order.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2:
        raise ValidationError(f"K must be 2-d, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise ValidationError("K contains non-finite entries")
    u, s, vt = np.linalg.svd(K, full_matrices=False)
    qx, qy = u.T, vt
    dx = positive_diagonal_signs(qx)
    dy = positive_diagonal_signs(qy)
    qx = qx * dx[:, None]
    qy = qy * dy[:, None]
    lambdas = s * dx * dy
    order = np.argsort(-np.abs(lambdas), kind="stable")
    return qx[order], qy[order], lambdas[order]


def _parse_shrinkage(shrinkage):
    if shrinkage is None or shrinkage == "none":
        return None
    if shrinkage == "auto":
        return "auto"
    try:
        lam = float(shrinkage)
    except (TypeError, ValueError):
        raise ValidationError(f"shrinkage must be 'auto', 'none' or a number, got {shrinkage!r}")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"shrinkage intensity must lie in [0, 1], got {lam}")
    return lam


def _standardize_pair(x, y):
    p = x.shape[1]
    try:
        return standardize(np.hstack([x, y]))
    except ConstantColumnError as exc:
        block, col = ("x", exc.column) if exc.column < p else ("y", exc.column - p)
        raise ConstantColumnError(col, f"{block}[{col}]") from None


def fit_cca(x, y, scale=True, shrinkage="auto"):
    """Fit CCA whitening to paired data.

    Parameters
    ----------
    x : array_like, shape (n, p)
    y : array_like, shape (n, q)
    scale : bool
        Express directions and loadings for standardized variables.  The
        canonical correlations do not depend on this.
    shrinkage : {"auto", "none"} or float
        ``"auto"`` estimates the optimal intensity on the joint standardized
        data; a number fixes it; ``"none"`` uses empirical correlations, which
        requires ``n > max(p, q)``.

    With positive shrinkage the whitening matrices are computed in implicit
    low-rank form and no ``p x p`` or ``q x q`` matrix is built.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 2:
        raise ValidationError("x and y must be 2-d arrays")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    n, p = x.shape
    q = y.shape[1]
    if n < 3:
        raise InsufficientDataError(f"need at least 3 rows, got {n}")
    lam = _parse_shrinkage(shrinkage)
    z, mean, sd = _standardize_pair(x, y)
    if lam == "auto":
        lam = shrinkage_intensity(z)
    zx, zy = z[:, :p], z[:, p:]
    unit_x = np.ones(p) if scale else sd[:p]
    unit_y = np.ones(q) if scale else sd[p:]

    if not lam:
        if n <= max(p, q):
            raise SingularityError(
                f"{_SHRINKAGE_HINT} (n={n} <= max(p, q)={max(p, q)})"
            )
        cor = zx.T @ zy / (n - 1)
        summary = DatasetSummary(
            mean_x=np.zeros(p),
            mean_y=np.zeros(q),
            var_x=unit_x**2,
            var_y=unit_y**2,
            cor_x=_unit_diag(zx.T @ zx / (n - 1)),
            cor_y=_unit_diag(zy.T @ zy / (n - 1)),
            cross_cor=cor,
            n_samples=n,
        )
        qx, qy, lambdas = cca_decompose(compute_k(summary))
        wx = block_whitening(summary.cor_x, summary.var_x, qx)
        wy = block_whitening(summary.cor_y, summary.var_y, qy)
        parts = (
            wx.whitening_matrix, wy.whitening_matrix,
            wx.loadings, wy.loadings,
            wx.cor_loadings, wy.cor_loadings,
        )
        lam = 0.0 if shrinkage not in (None, "none") else None
    else:
        rx = ShrinkageCorrelation.from_standardized(zx, lam)
        ry = ShrinkageCorrelation.from_standardized(zy, lam)
        qx, qy, lambdas = cca_decompose(compute_k_lowrank(rx, ry, zx, zy))
        psi_x = sqrt_product(rx, qx.T).T
        psi_y = sqrt_product(ry, qy.T).T
        parts = (
            inv_sqrt_product(rx, qx.T).T / unit_x,
            inv_sqrt_product(ry, qy.T).T / unit_y,
            psi_x * unit_x,
            psi_y * unit_y,
            psi_x,
            psi_y,
        )
    return CcaModel(
        lambdas, qx, qy, *parts,
        mean_x=mean[:p], mean_y=mean[p:], sd_x=sd[:p], sd_y=sd[p:],
        scaled=bool(scale),
        shrink_lambda=None if lam is None else float(lam),
        n_samples=n,
    )


def _unit_diag(c):
    c = (c + c.T) / 2
    np.fill_diagonal(c, 1.0)
    return c


def estimated_summary(model, x, y):
    """The correlation and variance estimates a model was fitted on, in model units.

    Densely reassembles the (possibly shrunken) correlation blocks, so only use
    it for moderate ``p`` and ``q``.
    """
    lam = model.shrink_lambda or 0.0
    full = DatasetSummary.from_data(x, y, shrink_lambda=lam)
    return dataclasses.replace(
        full,
        mean_x=np.zeros(model.p),
        mean_y=np.zeros(model.q),
        var_x=model.var_x,
        var_y=model.var_y,
    )


def scores(model, x, y):
    """Canonical variables ``(x - mean) W_X^T`` and ``(y - mean) W_Y^T``.

    On the training data with empirical estimates each score block has unit
    sample variance and cross-correlation ``diag(lambdas)``.  With shrinkage
    these hold only approximately, since ``W`` whitens the shrunken estimate.
    """
    ux, uy = model.model_units(x, y)
    return ux @ model.directions_x.T, uy @ model.directions_y.T


def optimal_linear_predictor(summary):
    """Best linear predictor ``Y* = a + b^T X`` in mean squared error.

    Returns ``a`` of shape (q,) and ``b = Sigma_X^{-1} Sigma_XY`` of shape (p, q).
    """
    cov_x = summary.cov_x
    vals = np.linalg.eigvalsh(cov_x)
    if vals[0] <= 1e-12 * vals[-1]:
        raise SingularityError(
            f"Sigma_X is singular: eigenvalue {vals[0]:.6g}", eigenvalue=float(vals[0])
        )
    b = np.linalg.solve(cov_x, summary.cross_cov)
    a = summary.mean_y - b.T @ summary.mean_x
    return a, b


def mse_reduction(obj):
    """Decrease in predictive MSE from including the predictors.

    Accepts a :class:`CcaModel` (sum of squared canonical correlations) or a
    ``K`` matrix (``trace(K^T K)``).
    """
    if isinstance(obj, CcaModel):
        return float(np.sum(obj.lambdas**2))
    K = np.asarray(obj, dtype=float)
    if K.ndim != 2 or not np.all(np.isfinite(K)):
        raise ValidationError("expected a CcaModel or a finite 2-d K matrix")
    return float(np.sum(K * K))

"""Two-layer latent variable model that generates data with given CCA structure.

Level 1 draws uncorrelated, zero-mean, unit-variance latents ``Z^X`` (p),
``Z^Y`` (q) and ``Z^shared`` (m).  Level 2 mixes them into CCA-whitened
variables::

    Xt_i = sqrt(1 - |l_i|) Z^X_i + sqrt(|l_i|) Z^shared_i
    Yt_i = sqrt(1 - |l_i|) Z^Y_i + sqrt(|l_i|) Z^shared_i * sign(l_i)

with ``l_i = 0`` for components beyond ``m``.  Observations are the colored
and translated ``X = Phi_X^T Xt + mu_X`` (row form ``X = Xt @ Phi_X + mu_X``).

Random streams: one ``SeedSequence(seed)`` per sampling call, spawned into
three children used in the order ``Z^X``, ``Z^Y``, ``Z^shared``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .whitening import DatasetSummary, matrix_sqrt_inv_sym

LATENT_DISTS = ("normal", "t")


def _check_lambdas(lambdas):
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if not np.all(np.isfinite(lambdas)) or np.any(np.abs(lambdas) > 1):
        raise ValidationError("canonical correlations must lie in [-1, 1]")
    return lambdas


def _check_latent(latent_dist, dof):
    if latent_dist not in LATENT_DISTS:
        raise ValidationError(f"latent_dist must be one of {LATENT_DISTS}, got {latent_dist!r}")
    if latent_dist == "t" and not dof > 2:
        raise ValidationError(f"scaled-t latents need dof > 2, got {dof}")


def _latents(rng, shape, latent_dist, dof):
    if latent_dist == "normal":
        return rng.standard_normal(shape)
    # rescaled to unit variance
    return rng.standard_t(dof, size=shape) * np.sqrt((dof - 2) / dof)


def mixing_matrix(lambdas, p=None, q=None):
    """Level-2 mixing coefficients as a ``(p + q) x (p + q + m)`` matrix ``A``.

    ``(Xt, Yt) = A (Z^X, Z^Y, Z^shared)``, so the population covariance of the
    whitened variables is ``A A^T``.
    """
    lambdas = _check_lambdas(lambdas)
    m = lambdas.size
    p = m if p is None else int(p)
    q = m if q is None else int(q)
    if min(p, q) != m:
        raise DimensionError(f"min(p, q) = {min(p, q)} but {m} lambdas given")
    own_x = np.ones(p)
    own_y = np.ones(q)
    own_x[:m] = own_y[:m] = np.sqrt(1 - np.abs(lambdas))
    a = np.zeros((p + q, p + q + m))
    a[:p, :p] = np.diag(own_x)
    a[p:, p : p + q] = np.diag(own_y)
    idx = np.arange(m)
    a[idx, p + q + idx] = np.sqrt(np.abs(lambdas))
    a[p + idx, p + q + idx] = np.sqrt(np.abs(lambdas)) * np.sign(lambdas)
    return a


def sample_level2(lambdas, n, p=None, q=None, latent_dist="normal", dof=5.0, seed=0):
    """Draw ``n`` rows of CCA-whitened variables ``(Xt, Yt)``.

    ``p`` and ``q`` default to ``len(lambdas)``; ``min(p, q)`` must equal the
    number of canonical correlations.
    """
    lambdas = _check_lambdas(lambdas)
    _check_latent(latent_dist, dof)
    m = lambdas.size
    p = m if p is None else int(p)
    q = m if q is None else int(q)
    if min(p, q) != m:
        raise DimensionError(f"min(p, q) = {min(p, q)} but {m} lambdas given")
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    gx, gy, gs = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    zx = _latents(gx, (n, p), latent_dist, dof)
    zy = _latents(gy, (n, q), latent_dist, dof)
    zs = _latents(gs, (n, m), latent_dist, dof)
    mag = np.abs(lambdas)
    own = np.sqrt(1 - mag)
    shared = np.sqrt(mag) * zs
    xt = zx.copy()
    yt = zy.copy()
    xt[:, :m] = own * zx[:, :m] + shared
    yt[:, :m] = own * zy[:, :m] + shared * np.sign(lambdas)
    return xt, yt


def complete_rotation(Q, tol=1e-8):
    """Extend a semi-orthogonal ``m x p`` matrix to a ``p x p`` orthogonal one.

    New rows come from Gram-Schmidt on the standard basis vectors in index
    order, skipping candidates that lie (numerically) in the current span.
    """
    Q = np.asarray(Q, dtype=float)
    m, p = Q.shape
    rows = list(Q)
    for k in range(p):
        if len(rows) == p:
            break
        v = np.zeros(p)
        v[k] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for r in rows:
                v -= (r @ v) * r
        norm = np.linalg.norm(v)
        if norm > tol:
            rows.append(v / norm)
    return np.array(rows)


@dataclass(frozen=True)
class GenerativeCcaModel:
    """Generative CCA model with square coloring matrices.

    ``coloring_x`` is ``Phi_X`` (p x p); the population covariance of X is
    ``Phi_X^T Phi_X``.
    """

    lambdas: np.ndarray
    coloring_x: np.ndarray
    coloring_y: np.ndarray
    mean_x: np.ndarray = None
    mean_y: np.ndarray = None
    latent_dist: str = "normal"
    dof: float = 5.0
    seed: int = 0

    def __post_init__(self):
        lambdas = _check_lambdas(self.lambdas)
        _check_latent(self.latent_dist, self.dof)
        cx = np.asarray(self.coloring_x, dtype=float)
        cy = np.asarray(self.coloring_y, dtype=float)
        for name, c in (("coloring_x", cx), ("coloring_y", cy)):
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise DimensionError(f"{name} must be square, got shape {c.shape}")
            s = np.linalg.svd(c, compute_uv=False)
            if s.size and s[-1] <= 1e-12 * s[0]:
                raise ValidationError(f"{name} is not invertible")
        p, q = cx.shape[0], cy.shape[0]
        if lambdas.size != min(p, q):
            raise DimensionError(f"expected {min(p, q)} lambdas, got {lambdas.size}")
        mx = np.zeros(p) if self.mean_x is None else np.asarray(self.mean_x, float).ravel()
        my = np.zeros(q) if self.mean_y is None else np.asarray(self.mean_y, float).ravel()
        if mx.size != p or my.size != q:
            raise DimensionError("means do not match coloring dimensions")
        for name, value in (
            ("lambdas", lambdas), ("coloring_x", cx), ("coloring_y", cy),
            ("mean_x", mx), ("mean_y", my),
        ):
            object.__setattr__(self, name, value)

    @property
    def p(self):
        return self.coloring_x.shape[0]

    @property
    def q(self):
        return self.coloring_y.shape[0]

    @classmethod
    def from_cca_model(cls, model, x, y, **kwargs):
        """Generative model reproducing the covariance a CCA fit was estimated on.

        ``x`` and ``y`` are the training data (needed to rebuild the dense
        correlation estimates).  Rotations are completed to square matrices
        with :func:`complete_rotation`; the added components carry zero
        canonical correlation.  Data are generated in original units.
        """
        from .cca import estimated_summary

        summary = estimated_summary(model, x, y)
        root_x, _ = matrix_sqrt_inv_sym(summary.cor_x)
        root_y, _ = matrix_sqrt_inv_sym(summary.cor_y)
        return cls(
            lambdas=model.lambdas,
            coloring_x=complete_rotation(model.rotation_x) @ root_x * model.sd_x,
            coloring_y=complete_rotation(model.rotation_y) @ root_y * model.sd_y,
            mean_x=model.mean_x,
            mean_y=model.mean_y,
            **kwargs,
        )

    def cross_covariance(self):
        lam = np.zeros((self.p, self.q))
        m = self.lambdas.size
        lam[np.arange(m), np.arange(m)] = self.lambdas
        return self.coloring_x.T @ lam @ self.coloring_y

    def joint_covariance(self):
        """Population covariance of the composite vector ``(X, Y)``."""
        sxy = self.cross_covariance()
        return np.block([
            [self.coloring_x.T @ self.coloring_x, sxy],
            [sxy.T, self.coloring_y.T @ self.coloring_y],
        ])

    def population_summary(self):
        return DatasetSummary.from_covariance(
            self.coloring_x.T @ self.coloring_x,
            self.coloring_y.T @ self.coloring_y,
            self.cross_covariance(),
            self.mean_x,
            self.mean_y,
        )

    def sample(self, n, seed=None):
        return sample_observed(self, n, seed)


def sample_observed(model, n, seed=None):
    """Draw ``n`` observations ``(X, Y)`` from a :class:`GenerativeCcaModel`."""
    xt, yt = sample_level2(
        model.lambdas, n, model.p, model.q,
        latent_dist=model.latent_dist, dof=model.dof,
        seed=model.seed if seed is None else seed,
    )
    return xt @ model.coloring_x + model.mean_x, yt @ model.coloring_y + model.mean_y


def alternating_lambdas(m, magnitude, n_signal=10):
    """``(l, -l, l, -l, ...)`` on the first ``n_signal`` of ``m`` components."""
    lambdas = np.zeros(m)
    k = min(n_signal, m)
    lambdas[:k] = magnitude * np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    return lambdas


def simulation_design(p, q, lambda_magnitude, n_signal=10, **kwargs):
    """Identity-covariance blocks with ``Sigma_XY = diag(l, -l, l, ...)``.

    The first ``n_signal`` components alternate in sign; any further
    components are uncorrelated.
    """
    if not 0.0 <= lambda_magnitude <= 1.0:
        raise ValidationError(f"lambda_magnitude must lie in [0, 1], got {lambda_magnitude}")
    return GenerativeCcaModel(
        lambdas=alternating_lambdas(min(p, q), lambda_magnitude, n_signal),
        coloring_x=np.eye(p),
        coloring_y=np.eye(q),
        **kwargs,
    )

"""Canonical correlation analysis as a whitening transformation.

Signed canonical correlations, shrinkage estimation for small samples with an
implicit low-rank fast path, and a two-layer generative latent variable model.
"""

from .cca import (
    CcaModel,
    cca_decompose,
    compute_k,
    compute_k_lowrank,
    estimated_summary,
    fit_cca,
    mse_reduction,
    optimal_linear_predictor,
    scores,
)
from .errors import (
    ConstantColumnError,
    DimensionError,
    InsufficientDataError,
    SingularityError,
    ValidationError,
    WccaError,
)
from .generative import (
    GenerativeCcaModel,
    complete_rotation,
    mixing_matrix,
    sample_level2,
    sample_observed,
    simulation_design,
)
from .shrinkage import (
    ShrinkageCorrelation,
    estimate_shrinkage_correlation,
    inv_sqrt_product,
    shrinkage_intensity,
    sqrt_product,
    standardize,
)
from .simulation import SimulationConfig, SimulationReport, run_sign_recovery
from .whitening import (
    DatasetSummary,
    WhiteningResult,
    WhiteningSpec,
    block_whitening,
    matrix_sqrt_inv_sym,
    pca_cor_rotation,
    whitening_matrix,
)

__version__ = "0.1.0"

"""cmekit: conditional mean embeddings on exactly computable finite
spaces, with Gaussian conditioning via oblique projections and empirical
Gram-form estimators."""

__version__ = "0.1.0"

from .cme import (
    AssumptionReport,
    CenteredCmeOperator,
    ClassicalCmeResult,
    TruncatedCme,
    UncenteredCmeOperator,
    check_assumptions,
    classical_cme,
    fit_centered,
    fit_truncated,
    fit_uncentered,
    marginal_consistency,
    truncation_sweep,
    weak_identity_check,
)
from .discrete import (
    ConditionalOracle,
    EmbeddedJoint,
    FiniteJoint,
    Moments,
    conditional_oracle,
    conditional_table,
    embed_joint,
    embed_moments,
    f_g,
    mmd,
    oracle_cme,
    oracle_conditional_cov,
)
from .empirical import (
    EstimatorConfig,
    SampleSet,
    convergence_study,
    draw_samples,
    empirical_moments,
    naive_empirical_cme,
    regularized_cme,
    spectrum_experiment,
    truncated_empirical_cme,
    whitened_covariance,
)
from .gaussian import (
    GaussianConditional,
    GaussianJoint,
    ObliqueProjection,
    bridge_from_moments,
    condition,
    condition_truncated,
    incompatible_example,
    is_compatible,
    oblique_projection,
    verify_bridge,
)
from .kernels import (
    FeatureBasis,
    Kernel,
    KernelHypothesisReport,
    feature_coordinates,
    gram,
    hc_dense_finite,
    is_characteristic_finite,
    is_l2_universal_finite,
    kernel_hypothesis_report,
)
from .linalg import (
    DEFAULT_TOL,
    RangeCheck,
    SpectralDecomposition,
    Tolerance,
    douglas_factor,
    douglas_residuals,
    numerical_rank,
    pinv,
    range_included,
    sym_eig,
)

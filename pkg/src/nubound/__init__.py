"""Regression-based lower bounds on mutual information and channel capacity.

Population bounds from covariance partitions (`bounds`), capacity
maximization over Gaussian pseudo-inputs (`capacity`), Gaussianizing
transforms (`transforms`), cubic smoothing splines (`spline`), the Kraskov
k-NN mutual-information estimator (`knnmi`), the spline/BCa-bootstrap
inference pipeline and composite estimator (`estimate`), generative models
with ground-truth MI (`models`), and the Monte Carlo study harness
(`harness`).
"""

from .bounds import (
    BoundEstimate,
    BoundKind,
    CovariancePartition,
    Direction,
    NuStatistic,
    avg_mmse_bound,
    bound_from_nu,
    gaussian_corr_bound,
    input_side_bound,
    nu_bound_nats,
    nu_from_moments,
)
from .capacity import (
    CapacityBound,
    ChannelMoments,
    GaussianPseudoInput,
    OptimizationResult,
    SearchBox,
    bound_at,
    maximize_capacity_bound,
)
from .errors import (
    BoundDomainError,
    DomainEscapeError,
    DuplicatePointsError,
    EmptyGridError,
    InfeasibleSearchBoxError,
    InvalidNuError,
    InversionFailureError,
    NonConvergenceError,
    NonPositiveDefiniteError,
    NuboundError,
    OrderViolationError,
    RankDeficientError,
    SingularMatrixError,
    SupportViolationError,
    TooFewPointsError,
)
from .estimate import (
    BcaInterval,
    CompositeEstimate,
    CompositeSource,
    NuHatResult,
    SplineConfig,
    StatKind,
    bca_interval,
    composite,
    nu_hat,
)
from .harness import (
    ReplicationReport,
    Scenario,
    emit_results,
    run_convergence_demo,
    run_panel,
    run_scenario,
)
from .knnmi import KnnConfig, estimate_mi
from .models import (
    GenModel,
    ModelVariant,
    TruthMethod,
    TruthResult,
    gaussian_x_cdf,
    generate,
    mixture_x_cdf,
    sample_params,
    true_mi,
)
from .sample import JointSample, read_csv, write_csv
from .transforms import (
    GaussianizingMap,
    MapKind,
    empirical_rank_map,
    gaussianize,
    invert,
    known_cdf_map,
)

__version__ = "0.1.0"

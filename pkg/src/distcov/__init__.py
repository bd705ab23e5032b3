"""Distance covariance and correlation from pairwise distances."""
from __future__ import annotations

__version__ = "0.1.0"

from .applications import (  # noqa: E402
    LinearModelFit,
    SerialResult,
    fit_least_squares,
    nonlinearity_test,
    serial_dcor,
)
from .core import (  # noqa: E402
    CenteredDistances,
    DcovEstimates,
    UnbiasedEstimates,
    corrected_dcor,
    dcov_estimates,
    double_center,
    normalized_stats,
    t2,
    unbiased_dcov,
    v_dcov2,
)
from .inference import (  # noqa: E402
    PermutationPlan,
    Statistic,
    TestResult,
    highdim_test,
    permutation_test,
)
from .metrics import (  # noqa: E402
    DistanceMatrix,
    Sample,
    discrete_distances,
    euclidean_distances,
    read_distance_csv,
    validate_distance_matrix,
)

__all__ = [
    "CenteredDistances",
    "DcovEstimates",
    "DistanceMatrix",
    "LinearModelFit",
    "PermutationPlan",
    "Sample",
    "SerialResult",
    "Statistic",
    "TestResult",
    "UnbiasedEstimates",
    "corrected_dcor",
    "dcov_estimates",
    "discrete_distances",
    "double_center",
    "euclidean_distances",
    "fit_least_squares",
    "highdim_test",
    "nonlinearity_test",
    "normalized_stats",
    "permutation_test",
    "read_distance_csv",
    "serial_dcor",
    "t2",
    "unbiased_dcov",
    "v_dcov2",
    "validate_distance_matrix",
]

"""Analytic and Monte Carlo moments of the Bayesian MMSE error estimator for LDA."""

from .gauss import NumericError, bivariate_normal_cdf, std_normal_cdf
from .model import (
    AsymptoticProfile,
    FullModelSpec,
    ModelError,
    ReducedConditional,
    ReducedUnconditional,
    reduce_conditional,
    reduce_unconditional,
    swap_classes,
)
from .moments import (
    MomentMatrix,
    asymptotic_limits,
    conditional_coefficients,
    conditional_moment_matrix,
    metrics_from_matrix,
    unconditional_coefficients,
    unconditional_moment_matrix,
)

__version__ = "0.1.0"

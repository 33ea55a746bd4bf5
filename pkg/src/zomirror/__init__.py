"""Zeroth-order composite optimization in an entropy-like mirror geometry.

The package bundles a two-point Rademacher gradient estimator, a
Lambert-W based elastic-net proximal step, adaptive and recursive-momentum
mirror-descent solvers, a Euclidean proximal-SGD baseline, synthetic
benchmark problems, and a reproducible experiment CLI.
"""

from .core import (
    ElasticNet,
    FeasibleSet,
    GradientMapResult,
    NumericError,
    Problem,
    composite_value,
    elastic_net_value,
    gradient_map,
)
from .mirror import (
    MirrorGeometry,
    bregman,
    dgf_value,
    inverse_mirror_map,
    lambert_w0,
    mirror_map,
    prox_composite,
)
from .problems import (
    ExplanationProblem,
    SparseRegressionProblem,
    TinyClassifier,
    explanation_loss,
    make_explanation_problem,
    make_sparse_regression,
    make_tiny_classifier,
    pn_cost,
    pp_cost,
    sparse_regression_design,
)
from .sampling import (
    EstimatorConfig,
    GradientEstimate,
    default_smoothing,
    minibatch_gradient,
    paired_storm_estimates,
    rademacher_vector,
    two_point_estimate,
)
from .solvers import (
    ALGORITHMS,
    RunConfig,
    StepsizeState,
    StormState,
    Trace,
    TraceRecord,
    adaptive_stepsize_md_update,
    fw_combined_step,
    run_zo_ada_expgrad,
    run_zo_ada_expgrad_plus,
    run_zo_expstorm,
    run_zo_psgd,
    sample_output_iterate,
    scmd_step,
    storm_momentum_update,
    storm_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "ElasticNet",
    "EstimatorConfig",
    "ExplanationProblem",
    "FeasibleSet",
    "GradientEstimate",
    "GradientMapResult",
    "MirrorGeometry",
    "NumericError",
    "Problem",
    "RunConfig",
    "SparseRegressionProblem",
    "StepsizeState",
    "StormState",
    "TinyClassifier",
    "Trace",
    "TraceRecord",
    "adaptive_stepsize_md_update",
    "bregman",
    "composite_value",
    "default_smoothing",
    "dgf_value",
    "elastic_net_value",
    "explanation_loss",
    "fw_combined_step",
    "gradient_map",
    "inverse_mirror_map",
    "lambert_w0",
    "make_explanation_problem",
    "make_sparse_regression",
    "make_tiny_classifier",
    "minibatch_gradient",
    "mirror_map",
    "paired_storm_estimates",
    "pn_cost",
    "pp_cost",
    "prox_composite",
    "rademacher_vector",
    "run_zo_ada_expgrad",
    "run_zo_ada_expgrad_plus",
    "run_zo_expstorm",
    "run_zo_psgd",
    "sample_output_iterate",
    "scmd_step",
    "sparse_regression_design",
    "storm_momentum_update",
    "storm_schedule",
    "two_point_estimate",
    "__version__",
]

"""Direct estimation of sparse changes between two pairwise Markov networks.

Given samples from two distributions P and Q that share a pairwise graphical
structure, the change in their parameters is estimated in one step by fitting
the density ratio p(x)/q(x) as a log-linear model over pairwise sufficient
statistics, with a group penalty per factor so unchanged factors come out
exactly zero.  Neither network is estimated on its own, which is what makes
the approach work when the individual networks are dense or non-Gaussian but
their difference is sparse.

Layout:

- ``features``: basis families and the flat block parameterization.
- ``ratio``: the ratio model, its normalizer, objective, and gradient.
- ``solvers``: primal (monotone FISTA) and dual (entropic, L-BFGS) routes.
- ``sampling``: synthetic Gaussian pairs, power transforms, a quartic model
  with zero pairwise correlation, and a coordinate slice sampler.
- ``evaluation``: regularization paths, precision-recall, hold-out and
  cross-validated selection, and a permutation stability test.
- ``plots``: PNG rendering of paths, precision-recall, and timings.
- ``cli``: the ``mnchange`` command (generate / fit / path / eval-pr /
  bench-dual / permtest).
"""

from .evaluation import (
    CvllSelection,
    HollSelection,
    PermutationResult,
    PRCurve,
    RegPath,
    average_pr_curves,
    cvll_select,
    edge_scores,
    nonzero_edges,
    path_pr_curve,
    permutation_test,
    pr_curve,
    pr_from_path_data,
    regularization_path,
    select_by_holl,
)
from .features import (
    BasisSpec,
    ParamVector,
    eval_basis,
    eval_basis_cols,
    eval_factor_cols,
    factor_offset,
    factor_ordinal,
    factor_pairs,
    num_factors,
)
from .ratio import (
    FeatureCache,
    estimate_normalizer,
    feature_sum,
    holl,
    kliep_gradient,
    kliep_loglik,
    log_normalizer,
    ratio,
    ratio_at,
)
from .sampling import (
    DiamondSpec,
    PrecisionPair,
    diamond_log_density_unnorm,
    make_diamond_pair,
    make_gaussian_pair,
    npn_transform,
    sample_gaussian_mn,
    slice_sample,
)
from .solvers import (
    DualState,
    FitResult,
    SolveConfig,
    auto_route,
    dual_gradient,
    dual_objective,
    dual_xi,
    group_prox,
    recover_primal,
    solve_dual,
    solve_primal,
    zero_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSpec", "ParamVector", "eval_basis", "eval_basis_cols", "eval_factor_cols",
    "factor_offset", "factor_ordinal", "factor_pairs", "num_factors",
    "FeatureCache", "estimate_normalizer", "feature_sum", "holl", "kliep_gradient",
    "kliep_loglik", "log_normalizer", "ratio", "ratio_at",
    "DualState", "FitResult", "SolveConfig", "auto_route", "dual_gradient",
    "dual_objective", "dual_xi", "group_prox", "recover_primal", "solve_dual",
    "solve_primal", "zero_threshold",
    "DiamondSpec", "PrecisionPair", "diamond_log_density_unnorm", "make_diamond_pair",
    "make_gaussian_pair", "npn_transform", "sample_gaussian_mn", "slice_sample",
    "CvllSelection", "HollSelection", "PermutationResult", "PRCurve", "RegPath",
    "average_pr_curves", "cvll_select", "edge_scores", "nonzero_edges",
    "path_pr_curve", "permutation_test", "pr_curve", "pr_from_path_data",
    "regularization_path", "select_by_holl",
    "__version__",
]

"""Bayesian additive regression trees.

A regularized sum-of-trees model for regression and probit classification,
fit by a backfitting MCMC sampler, with posterior point and interval
prediction, partial dependence analysis, and model-free variable selection.
"""

from .data import (
    Column,
    Dataset,
    build_cutpoints,
    friedman_function,
    generate_friedman,
    inverse_scale,
    load_csv,
    load_prediction_matrix,
    make_dataset,
    scale_response,
)
from .errors import (
    BartError,
    DataError,
    DegenerateLabelsError,
    DegenerateResponseError,
    InvalidTreeError,
    ModelParseError,
    ModelVersionError,
    SchemaError,
    StructuralEditError,
)
from .mcmc import (
    ChainConfig,
    SuffStats,
    chain_rng,
    draw_leaf_values,
    draw_sigma,
    draw_tree,
    iterate_chain,
    leaf_log_marginal,
    leaf_suff_stats,
    partial_residuals,
    propose_move,
    run_chain,
    tree_log_marginal,
)
from .posterior import (
    PosteriorDraws,
    interval,
    merge_chains,
    partial_dependence,
    point_estimate,
    predict,
    variable_inclusion,
)
from .priors import (
    PriorSpec,
    calibrate_lambda,
    calibrate_prior,
    estimate_sigma_hat,
    leaf_prior_sd,
    sample_tree_from_prior,
    split_prob,
    tree_log_prior,
)
from .probit import draw_latents, predict_prob, run_probit_chain
from .serialize import load_model, save_model
from .trees import (
    DecisionTree,
    Ensemble,
    SplitRule,
    assign_leaf,
    edit_change,
    edit_grow,
    edit_prune,
    edit_swap,
    evaluate_forest,
    partition,
)

__version__ = "0.1.0"

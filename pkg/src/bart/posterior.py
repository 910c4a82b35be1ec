"""Posterior post-processing: prediction, intervals, partial dependence, variable usage.

Every function here is pure over an immutable :class:`PosteriorDraws`.  Draws
live on the sampler's working scale; outputs are mapped to original response
units (regression) or to probabilities (probit) per draw before summarizing,
so means and quantiles always refer to the reported scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from .data import inverse_scale
from .errors import BartError
from .trees import Ensemble, Interior, evaluate_tree, grid_positions


@dataclass(frozen=True)
class PosteriorDraws:
    """The kept post-burn-in states of one chain plus everything needed to predict.

    ``ensembles`` all share the tree count and the training cutpoint grids;
    ``scaling`` is the training response range (absent in probit mode, where
    ``offset`` shifts the latent scale instead).
    """

    ensembles: tuple
    grids: tuple
    scaling: tuple | None
    mode: str
    spec: object
    config: object
    columns: tuple
    response_name: str
    offset: float = 0.0

    def __post_init__(self):
        if len(self.ensembles) < 1:
            raise BartError("need at least one posterior draw")
        m = self.ensembles[0].num_trees
        if any(ens.num_trees != m for ens in self.ensembles):
            raise BartError("all draws must share the tree count")
        if self.mode == "regression":
            if self.scaling is None or not self.scaling[1] > self.scaling[0]:
                raise BartError("regression draws need an invertible response scaling")
        elif self.mode != "probit":
            raise BartError(f"unknown mode {self.mode!r}")

    @property
    def num_draws(self) -> int:
        return len(self.ensembles)

    @property
    def num_trees(self) -> int:
        return self.ensembles[0].num_trees

    @property
    def num_predictors(self) -> int:
        return len(self.grids)

    def sigma_draws(self) -> np.ndarray:
        """Noise-scale draws in original response units (all ones in probit mode)."""
        sig = np.array([ens.sigma for ens in self.ensembles])
        if self.scaling is not None:
            sig = sig * (self.scaling[1] - self.scaling[0])
        return sig


def _forest_values(draws: PosteriorDraws, x: np.ndarray) -> np.ndarray:
    """Per-draw forest sums on the working scale; shape (num_draws, num_rows)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != draws.num_predictors:
        raise BartError(f"expected {draws.num_predictors} predictors, got {x.shape[1]}")
    pos = grid_positions(x, draws.grids)
    out = np.zeros((draws.num_draws, x.shape[0]))
    for k, ens in enumerate(draws.ensembles):
        row = out[k]
        for tree in ens.trees:
            row += evaluate_tree(tree, pos)
    return out


def _to_output_units(draws: PosteriorDraws, values: np.ndarray) -> np.ndarray:
    if draws.mode == "probit":
        return ndtr(values + draws.offset)
    return inverse_scale(values, draws.scaling)


def predict(draws: PosteriorDraws, x: np.ndarray, interval_alpha: float | None = None):
    """Posterior mean prediction for each row of ``x`` in output units.

    With ``interval_alpha`` also returns the lower and upper alpha/2 quantile
    curves as ``(mean, lower, upper)``.
    """
    values = _to_output_units(draws, _forest_values(draws, x))
    mean = values.mean(axis=0)
    if interval_alpha is None:
        return mean
    lo, hi = _quantile_pair(values, interval_alpha)
    return mean, lo, hi


def _quantile_pair(values: np.ndarray, alpha: float):
    if not 0.0 < alpha < 1.0:
        raise BartError(f"interval level must lie in (0, 1), got {alpha}")
    if values.shape[0] < 2:
        warnings.warn("fewer than two draws: interval is degenerate", stacklevel=3)
    lo = np.quantile(values, alpha / 2.0, axis=0)
    hi = np.quantile(values, 1.0 - alpha / 2.0, axis=0)
    return lo, hi


def point_estimate(draws: PosteriorDraws, x) -> float:
    """Posterior mean of the regression surface at one point, in original units."""
    return float(predict(draws, np.atleast_2d(x))[0])


def interval(draws: PosteriorDraws, x, alpha: float = 0.10):
    """Pointwise posterior interval: empirical alpha/2 and 1 - alpha/2 quantiles
    of the per-draw values, with linear interpolation between order statistics."""
    values = _to_output_units(draws, _forest_values(draws, np.atleast_2d(x)))[:, 0]
    lo, hi = _quantile_pair(values[:, None], alpha)
    return float(lo[0]), float(hi[0])


def default_pd_grid(x_train: np.ndarray, variable: int, points: int = 20) -> np.ndarray:
    """Equally spaced grid between a variable's observed min and max."""
    col = np.asarray(x_train, dtype=float)[:, variable]
    return np.linspace(col.min(), col.max(), points)


def partial_dependence(
    draws: PosteriorDraws,
    x_train: np.ndarray,
    variables,
    grid: np.ndarray | None = None,
    alpha: float = 0.10,
):
    """Marginal effect of a predictor subset, averaged over the training rows.

    For each grid value g, each draw contributes the average forest value over
    the training rows with the subset columns overwritten by g; mean and
    quantile summaries over draws come back in output units as
    ``(grid, mean, lower, upper)``.
    """
    variables = [int(v) for v in np.atleast_1d(variables)]
    if not variables:
        raise BartError("need at least one variable")
    x_train = np.atleast_2d(np.asarray(x_train, dtype=float))
    if grid is None:
        if len(variables) != 1:
            raise BartError("a grid must be supplied for multi-variable subsets")
        grid = default_pd_grid(x_train, variables[0])
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1 and len(variables) == 1:
        grid_rows = grid[:, None]
    else:
        grid_rows = np.atleast_2d(grid)
        if grid_rows.shape[1] != len(variables):
            raise BartError("grid width does not match the variable subset")

    n = x_train.shape[0]
    g = grid_rows.shape[0]
    stacked = np.repeat(x_train, g, axis=0).reshape(n, g, -1)
    stacked[:, :, variables] = grid_rows[None, :, :]
    stacked = stacked.reshape(n * g, -1)

    values = _to_output_units(draws, _forest_values(draws, stacked))
    per_draw = values.reshape(draws.num_draws, n, g).mean(axis=1)  # (K, g)
    mean = per_draw.mean(axis=0)
    lo, hi = _quantile_pair(per_draw, alpha)
    return grid, mean, lo, hi


def merge_chains(chains):
    """Concatenate the kept draws of independently run chains.

    Chains are exchangeable posterior samples, so merging is pure
    concatenation; returns the merged draws plus an array labeling every kept
    draw with its source chain's substream index.
    """
    chains = list(chains)
    if not chains:
        raise BartError("need at least one chain")
    base = chains[0]
    for other in chains[1:]:
        if other.mode != base.mode or other.scaling != base.scaling:
            raise BartError("chains disagree on mode or response scaling")
        if other.num_trees != base.num_trees or other.spec != base.spec:
            raise BartError("chains disagree on the prior")
        if len(other.grids) != len(base.grids) or any(
            not np.array_equal(a, b) for a, b in zip(other.grids, base.grids)
        ):
            raise BartError("chains disagree on the cutpoint grids")
    ensembles = tuple(ens for d in chains for ens in d.ensembles)
    labels = np.concatenate(
        [np.full(d.num_draws, d.config.chain_index, dtype=np.int64) for d in chains]
    )
    return replace(base, ensembles=ensembles), labels


def split_counts_by_variable(ens: Ensemble, p: int) -> np.ndarray:
    """Number of splitting rules using each variable, pooled across the ensemble."""
    out = np.zeros(p, dtype=np.int64)
    for tree in ens.trees:
        for node in tree.nodes:
            if isinstance(node, Interior):
                out[node.rule.variable] += 1
    return out


def variable_inclusion(draws: PosteriorDraws) -> np.ndarray:
    """Average proportion of splitting rules using each variable.

    Per draw, each variable's share of all splits is computed; draws with no
    splits at all are excluded from the average (with a warning if that leaves
    nothing, in which case the vector is all zeros).
    """
    p = draws.num_predictors
    total = np.zeros(p)
    used = 0
    for ens in draws.ensembles:
        counts = split_counts_by_variable(ens, p)
        n_splits = counts.sum()
        if n_splits > 0:
            total += counts / n_splits
            used += 1
    if used == 0:
        warnings.warn("no draw contains a split; inclusion frequencies are all zero", stacklevel=2)
        return total
    return total / used

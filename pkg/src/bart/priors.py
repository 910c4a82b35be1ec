"""The regularization prior and its data-driven calibration.

Three pieces: a tree-structure prior that favours shallow trees (split
probability decays with depth, split rules uniform over the available
variables and cutpoints), a conjugate normal prior that shrinks leaf values
toward zero, and a scaled-inverse-chi-square prior on the noise variance
anchored at a rough overestimate of sigma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .data import Dataset
from .errors import BartError, DegenerateResponseError, InvalidTreeError
from .trees import DecisionTree, Interior, Leaf, SplitRule

DEFAULT_ALPHA = 0.95
DEFAULT_BETA = 2.0
DEFAULT_K = 2.0
DEFAULT_NUM_TREES = 200
DEFAULT_NU = 3.0
DEFAULT_Q = 0.90


@dataclass(frozen=True)
class PriorSpec:
    """All hyperparameters of the model, plus how the derived ones were obtained.

    ``sigma_mu`` and ``lam`` are derived: ``sigma_mu = 0.5/(k*sqrt(num_trees))``
    for regression and ``3.0/(k*sqrt(num_trees))`` for probit, and ``lam`` puts
    the q-th quantile of the sigma prior at ``sigma_hat``.  ``sigma_hat`` and
    ``lam`` are None in probit mode, where sigma is fixed at 1.
    """

    alpha: float
    beta: float
    k: float
    num_trees: int
    nu: float
    q: float
    sigma_mu: float
    lam: float | None
    sigma_hat: float | None
    sigma_hat_mode: str
    mode: str = "regression"
    min_leaf: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise BartError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta < 0.0:
            raise BartError(f"beta must be nonnegative, got {self.beta}")
        if self.k <= 0.0:
            raise BartError(f"k must be positive, got {self.k}")
        if self.num_trees < 1:
            raise BartError(f"num_trees must be at least 1, got {self.num_trees}")
        if not 0.0 < self.q < 1.0:
            raise BartError(f"q must lie in (0, 1), got {self.q}")
        if self.nu <= 0.0:
            raise BartError(f"nu must be positive, got {self.nu}")
        if self.min_leaf < 1:
            raise BartError(f"min_leaf must be at least 1, got {self.min_leaf}")


def split_prob(depth: int, alpha: float, beta: float) -> float:
    """Prior probability that a node at the given depth is interior."""
    return alpha * (1.0 + depth) ** (-beta)


def leaf_prior_sd(k: float, num_trees: int, mode: str = "regression") -> float:
    """Prior standard deviation of a leaf value; shrinks like 1/sqrt(num_trees).

    Calibrated so that the sum of ``num_trees`` leaf contributions stays, with
    k-sigma confidence, inside the response range (regression, transformed
    scale) or inside (-3, 3) on the latent scale (probit).
    """
    half_range = 0.5 if mode == "regression" else 3.0
    return half_range / (k * math.sqrt(num_trees))


def estimate_sigma_hat(data: Dataset, mode: str = "linear") -> float:
    """Rough overestimate of the noise sd on the transformed response scale.

    "naive" is the sample standard deviation of the response; "linear" is the
    residual sd of an ordinary least squares fit on all predictors (with
    intercept), falling back to naive with a warning when n <= p + 1.
    """
    y = np.asarray(data.y, dtype=float)
    n = len(y)
    if n < 2:
        raise DegenerateResponseError("need at least two observations")
    naive = float(np.std(y, ddof=1))
    if naive == 0.0:
        raise DegenerateResponseError("response is constant")
    if mode == "naive":
        return naive
    if mode != "linear":
        raise BartError(f"unknown sigma_hat mode {mode!r}")
    p = data.p
    if n <= p + 1:
        warnings.warn(
            f"n={n} <= p+1={p + 1}: falling back to the naive sigma estimate",
            stacklevel=2,
        )
        return naive
    design = np.column_stack([np.ones(n), data.x])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    sd = math.sqrt(float(resid @ resid) / (n - p - 1))
    if sd < 1e-7 * naive:
        raise DegenerateResponseError(
            "least squares fits the response exactly; no residual scale to anchor the prior"
        )
    return sd


def calibrate_lambda(nu: float, q: float, sigma_hat: float) -> float:
    """Scale of the sigma prior such that P(sigma < sigma_hat) = q.

    Under sigma^2 ~ nu*lam/chi2_nu, P(sigma < s) = P(chi2_nu > nu*lam/s^2), so
    lam = sigma_hat^2 * Q / nu with Q the (1-q) quantile of chi2_nu.
    """
    if sigma_hat <= 0:
        raise BartError(f"sigma_hat must be positive, got {sigma_hat}")
    quantile = float(chi2.ppf(1.0 - q, nu))
    lam = sigma_hat**2 * quantile / nu
    achieved = float(chi2.sf(nu * lam / sigma_hat**2, nu))
    if abs(achieved - q) > 1e-6 * q:
        raise BartError(f"lambda calibration failed: wanted quantile {q}, achieved {achieved}")
    return lam


def calibrate_prior(
    data: Dataset,
    *,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    k: float = DEFAULT_K,
    num_trees: int = DEFAULT_NUM_TREES,
    nu: float = DEFAULT_NU,
    q: float = DEFAULT_Q,
    sigma_hat_mode: str = "linear",
    min_leaf: int = 1,
) -> PriorSpec:
    """Build a fully calibrated PriorSpec from the data.

    In probit mode sigma is fixed at 1, so neither sigma_hat nor lam is
    computed and (nu, q) are carried only as provenance.
    """
    mode = data.mode
    sigma_mu = leaf_prior_sd(k, num_trees, mode)
    if mode == "probit":
        sigma_hat, lam = None, None
    else:
        sigma_hat = estimate_sigma_hat(data, sigma_hat_mode)
        lam = calibrate_lambda(nu, q, sigma_hat)
    return PriorSpec(
        alpha=alpha,
        beta=beta,
        k=k,
        num_trees=num_trees,
        nu=nu,
        q=q,
        sigma_mu=sigma_mu,
        lam=lam,
        sigma_hat=sigma_hat,
        sigma_hat_mode=sigma_hat_mode if mode == "regression" else "none",
        mode=mode,
        min_leaf=min_leaf,
    )


def tree_log_prior(tree: DecisionTree, data: Dataset, spec: PriorSpec) -> float:
    """Log prior probability of a tree's topology and rules under the data's grids.

    Interior nodes contribute split_prob(d) times the uniform probabilities of
    their variable and cutpoint among the ones available there.  A leaf
    contributes (1 - split_prob(d)) only if it could have split; a leaf with no
    available split is terminal with certainty and contributes factor 1, which
    is what makes the prior sum to one over the reachable tree space.
    """
    total = 0.0
    pos = data.cut_positions
    stack = [(tree.root, np.arange(data.n), 0)]
    while stack:
        nid, rows, depth = stack.pop()
        node = tree.nodes[nid]
        sp = split_prob(depth, spec.alpha, spec.beta)
        lo, hi = data.available_splits(rows, spec.min_leaf)
        counts = np.maximum(hi - lo + 1, 0)
        if isinstance(node, Leaf):
            if counts.any():
                total += math.log1p(-sp)
        else:
            v = node.rule.variable
            if counts[v] == 0:
                raise InvalidTreeError(
                    f"node {nid} splits on variable {v} which has no available cutpoint"
                )
            n_vars = int(np.count_nonzero(counts))
            total += math.log(sp) - math.log(n_vars) - math.log(int(counts[v]))
            left = rows[pos[rows, v] <= node.rule.cutpoint]
            right = rows[pos[rows, v] > node.rule.cutpoint]
            stack.append((node.left, left, depth + 1))
            stack.append((node.right, right, depth + 1))
    return total


def sample_tree_from_prior(rng: np.random.Generator, data: Dataset, spec: PriorSpec) -> DecisionTree:
    """Draw a tree from the structure prior by recursive splitting.

    Each node splits with probability split_prob(depth); the variable is
    uniform among those with an available cutpoint and the cutpoint uniform
    among the available ones.  Recursion stops wherever no valid split exists.
    Leaf values are left at zero.
    """
    min_leaf = spec.min_leaf
    nodes: list = []
    # work items carry each node's slice of the position matrix; left child first
    work = [(data.cut_positions, 0, -1, False)]
    while work:
        pos, depth, parent, is_left = work.pop()
        nid = len(nodes)
        if parent >= 0:
            pnode = nodes[parent]
            if is_left:
                nodes[parent] = Interior(pnode.rule, nid, pnode.right)
            else:
                nodes[parent] = Interior(pnode.rule, pnode.left, nid)
        if rng.random() >= split_prob(depth, spec.alpha, spec.beta):
            nodes.append(Leaf(0.0))
            continue
        k = pos.shape[0]
        if k < 2 * min_leaf:
            nodes.append(Leaf(0.0))
            continue
        if min_leaf == 1:
            lo = pos.min(axis=0)
            hi = pos.max(axis=0) - 1
        else:
            srt = np.sort(pos, axis=0)
            lo = srt[min_leaf - 1, :]
            hi = srt[k - min_leaf, :] - 1
        avail = np.flatnonzero(hi >= lo)
        if len(avail) == 0:
            nodes.append(Leaf(0.0))
            continue
        v = int(avail[rng.integers(len(avail))])
        c = int(rng.integers(lo[v], hi[v] + 1))
        nodes.append(Interior(SplitRule(v, c), -1, -1))
        mask = pos[:, v] <= c
        work.append((pos[~mask], depth + 1, nid, False))
        work.append((pos[mask], depth + 1, nid, True))
    return DecisionTree(tuple(nodes), 0)

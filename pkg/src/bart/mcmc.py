"""Backfitting MCMC: Gibbs sweep over trees with leaf values marginalized out.

One sweep draws each tree in turn conditionally on all the others through its
partial residuals (a Metropolis-Hastings step on the structure with the leaf
values integrated out, followed by conjugate draws of the leaf values), then
draws sigma from its full conditional.

Reproducibility: the chain random stream is ``numpy.random.default_rng``
seeded with ``SeedSequence(entropy=seed, spawn_key=(chain_index,))``, so
multiple chains over the same seed are independent substreams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import BartError
from .posterior import PosteriorDraws
from .priors import PriorSpec, split_prob
from .trees import (
    DecisionTree,
    Ensemble,
    Interior,
    Leaf,
    SplitRule,
    edit_change,
    edit_grow,
    edit_prune,
    edit_swap,
    evaluate_tree,
    leaf_assignments,
)

MOVE_KINDS = ("grow", "prune", "change", "swap")
DEFAULT_MOVE_PROBS = (0.25, 0.25, 0.40, 0.10)

_NEG_INF = float("-inf")


def _log(x: float) -> float:
    return math.log(x) if x > 0 else _NEG_INF


@dataclass(frozen=True)
class ChainConfig:
    """Sampler run length, seeding, and proposal configuration.

    ``move_probs`` are the (grow, prune, change, swap) proposal-kind
    probabilities; ``max_leaves`` optionally restricts the state space by
    auto-rejecting grows beyond the cap (used by exactness tests).
    """

    burn_in: int = 200
    keep: int = 1000
    thin: int = 1
    seed: int = 0
    chain_index: int = 0
    move_probs: tuple = DEFAULT_MOVE_PROBS
    max_leaves: int | None = None
    recompute_every: int = 100

    def __post_init__(self):
        if self.burn_in < 0 or self.keep < 1 or self.thin < 1:
            raise BartError("need burn_in >= 0, keep >= 1, thin >= 1")
        if len(self.move_probs) != len(MOVE_KINDS) or any(p < 0 for p in self.move_probs):
            raise BartError("move_probs must be four nonnegative probabilities")
        if abs(sum(self.move_probs) - 1.0) > 1e-9:
            raise BartError("move_probs must sum to 1")


def chain_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    """The chain's random stream; distinct chain indices give independent substreams."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chain_index,)))


@dataclass(frozen=True)
class SuffStats:
    """Per-leaf count, sum and sum of squares of the residuals routed to each leaf."""

    count: np.ndarray
    sum: np.ndarray
    sum_sq: np.ndarray


def leaf_suff_stats(tree: DecisionTree, residuals: np.ndarray, data: Dataset) -> SuffStats:
    """Sufficient statistics of ``residuals`` under the tree's partition.

    Entries are aligned with ``tree.leaf_ids()``.
    """
    leaf_ids = tree.leaf_ids()
    slot = {nid: i for i, nid in enumerate(leaf_ids)}
    assign = leaf_assignments(tree, data.cut_positions)
    idx = np.fromiter((slot[a] for a in assign.tolist()), dtype=np.int64, count=len(assign))
    b = len(leaf_ids)
    count = np.bincount(idx, minlength=b).astype(float)
    total = np.bincount(idx, weights=residuals, minlength=b)
    total_sq = np.bincount(idx, weights=residuals * residuals, minlength=b)
    return SuffStats(count=count, sum=total, sum_sq=total_sq)


def leaf_log_marginal(count, total, total_sq, sigma: float, sigma_mu: float):
    """Log marginal likelihood of one leaf's residuals with its mean integrated out.

    This is log of integral prod_i N(r_i | mu, sigma^2) N(mu | 0, sigma_mu^2) dmu;
    an empty leaf contributes exactly zero.
    """
    n = np.asarray(count, dtype=float)
    s = np.asarray(total, dtype=float)
    ss = np.asarray(total_sq, dtype=float)
    s2 = sigma * sigma
    sm2 = sigma_mu * sigma_mu
    denom = s2 + n * sm2
    out = (
        -(n / 2.0) * math.log(2.0 * math.pi * s2)
        + 0.5 * np.log(s2 / denom)
        - ss / (2.0 * s2)
        + sm2 * s * s / (2.0 * s2 * denom)
    )
    return float(out) if out.ndim == 0 else out


def tree_log_marginal(
    tree: DecisionTree, residuals: np.ndarray, sigma: float, spec: PriorSpec, data: Dataset
) -> float:
    """Sum of leaf marginals over the tree's partition; independent of stored leaf values."""
    stats = leaf_suff_stats(tree, residuals, data)
    return float(
        np.sum(leaf_log_marginal(stats.count, stats.sum, stats.sum_sq, sigma, spec.sigma_mu))
    )


def partial_residuals(y: np.ndarray, ens: Ensemble, j: int, data: Dataset) -> np.ndarray:
    """Response minus the fit of every tree except tree ``j``."""
    if not 0 <= j < ens.num_trees:
        raise BartError(f"tree index {j} out of range for {ens.num_trees} trees")
    out = np.array(y, dtype=float)
    pos = data.cut_positions
    for k, tree in enumerate(ens.trees):
        if k != j:
            out -= evaluate_tree(tree, pos)
    return out


def draw_sigma(rng: np.random.Generator, residuals: np.ndarray, spec: PriorSpec) -> float:
    """Draw sigma from its full conditional given the full-forest residuals.

    sigma^2 is inverse gamma with shape (nu + n)/2 and scale (nu*lam + sum e^2)/2,
    realized as (nu*lam + sum e^2) / chi2_{nu + n}.
    """
    if spec.lam is None:
        raise BartError("sigma has no prior in probit mode")
    e = np.asarray(residuals, dtype=float)
    scale = spec.nu * spec.lam + float(e @ e)
    return math.sqrt(scale / rng.chisquare(spec.nu + len(e)))


class _TreeCtx:
    """Row sets, depths, node classification and split availability for one
    immutable tree over fixed data.

    Derived lazily where possible and cached; a context is discarded whenever
    the tree structure changes.
    """

    __slots__ = (
        "tree",
        "data",
        "min_leaf",
        "rows",
        "depth",
        "parent",
        "leaves",
        "interiors",
        "nogs",
        "_avail",
        "_grow",
        "_grow_leaves",
    )

    def __init__(self, tree: DecisionTree, data: Dataset, min_leaf: int):
        self.tree = tree
        self.data = data
        self.min_leaf = min_leaf
        self.rows: dict[int, np.ndarray] = {}
        self.depth: dict[int, int] = {}
        self.parent: dict[int, int] = {}
        self.leaves: list[int] = []
        self.interiors: list[int] = []
        pos = data.cut_positions
        nodes = tree.nodes
        stack = [(tree.root, np.arange(data.n), 0, -1)]
        while stack:
            nid, rows, d, par = stack.pop()
            self.rows[nid] = rows
            self.depth[nid] = d
            self.parent[nid] = par
            node = nodes[nid]
            if isinstance(node, Interior):
                self.interiors.append(nid)
                left = pos[rows, node.rule.variable] <= node.rule.cutpoint
                stack.append((node.right, rows[~left], d + 1, nid))
                stack.append((node.left, rows[left], d + 1, nid))
            else:
                self.leaves.append(nid)
        self.nogs = [
            nid
            for nid in self.interiors
            if isinstance(nodes[nodes[nid].left], Leaf) and isinstance(nodes[nodes[nid].right], Leaf)
        ]
        self._avail: dict[int, tuple] = {}
        self._grow: dict[int, bool] = {}
        self._grow_leaves = None

    def avail(self, nid: int):
        got = self._avail.get(nid)
        if got is None:
            got = self.data.available_splits(self.rows[nid], self.min_leaf)
            self._avail[nid] = got
        return got

    def counts(self, nid: int) -> np.ndarray:
        lo, hi = self.avail(nid)
        return np.maximum(hi - lo + 1, 0)

    def growable(self, nid: int) -> bool:
        got = self._grow.get(nid)
        if got is None:
            lo, hi = self.avail(nid)
            got = bool((hi >= lo).any())
            self._grow[nid] = got
        return got

    def growable_leaves(self) -> list[int]:
        if self._grow_leaves is None:
            self._grow_leaves = [nid for nid in self.leaves if self.growable(nid)]
        return self._grow_leaves


def _leaf_factor(has_avail: bool, depth: int, spec: PriorSpec) -> float:
    # a leaf that cannot split is terminal with certainty (factor 1)
    return math.log1p(-split_prob(depth, spec.alpha, spec.beta)) if has_avail else 0.0


def _subtree_scan(tree: DecisionTree, nid: int, rows: np.ndarray, depth: int, data: Dataset, spec: PriorSpec):
    """Log structure prior and leaf row sets of the subtree rooted at ``nid``.

    Returns None when the subtree routes fewer than ``min_leaf`` rows into some
    leaf, i.e. the tree is unreachable under the prior.
    """
    pos = data.cut_positions
    total = 0.0
    leaf_rows = []
    stack = [(nid, rows, depth)]
    while stack:
        cur, cur_rows, d = stack.pop()
        node = tree.nodes[cur]
        lo, hi = data.available_splits(cur_rows, spec.min_leaf)
        counts = np.maximum(hi - lo + 1, 0)
        if isinstance(node, Leaf):
            if len(cur_rows) < spec.min_leaf:
                return None
            total += _leaf_factor(bool(counts.any()), d, spec)
            leaf_rows.append(cur_rows)
            continue
        v = node.rule.variable
        if counts[v] == 0:
            return None
        n_vars = int(np.count_nonzero(counts))
        total += math.log(split_prob(d, spec.alpha, spec.beta)) - math.log(n_vars) - math.log(int(counts[v]))
        left = pos[cur_rows, v] <= node.rule.cutpoint
        stack.append((node.left, cur_rows[left], d + 1))
        stack.append((node.right, cur_rows[~left], d + 1))
    return total, leaf_rows


def _subtree_scan_cached(ctx: _TreeCtx, nid: int, spec: PriorSpec):
    """Same as :func:`_subtree_scan` for the context's own (valid) tree."""
    tree = ctx.tree
    total = 0.0
    leaf_rows = []
    stack = [nid]
    while stack:
        cur = stack.pop()
        node = tree.nodes[cur]
        d = ctx.depth[cur]
        if isinstance(node, Leaf):
            total += _leaf_factor(ctx.growable(cur), d, spec)
            leaf_rows.append(ctx.rows[cur])
            continue
        counts = ctx.counts(cur)
        n_vars = int(np.count_nonzero(counts))
        total += (
            math.log(split_prob(d, spec.alpha, spec.beta))
            - math.log(n_vars)
            - math.log(int(counts[node.rule.variable]))
        )
        stack.append(node.right)
        stack.append(node.left)
    return total, leaf_rows


@dataclass
class Proposal:
    """One Metropolis-Hastings proposal: the candidate tree plus the exact
    log proposal ratio log q(old | new) - log q(new | old) and log prior ratio
    log p(new) - log p(old).  Infeasible proposals auto-reject."""

    kind: str
    feasible: bool
    tree: DecisionTree | None = None
    log_proposal_ratio: float = 0.0
    log_prior_ratio: float = 0.0
    old_leaf_rows: list = field(default_factory=list)
    new_leaf_rows: list = field(default_factory=list)


def _propose_grow(rng, tree, ctx, data, spec, move_probs, max_leaves):
    if max_leaves is not None and tree.num_leaves >= max_leaves:
        return Proposal("grow", False)
    candidates = ctx.growable_leaves()
    if not candidates:
        return Proposal("grow", False)
    leaf = candidates[int(rng.integers(len(candidates)))]
    lo, hi = ctx.avail(leaf)
    counts = np.maximum(hi - lo + 1, 0)
    avail_vars = np.flatnonzero(counts)
    v = int(avail_vars[int(rng.integers(len(avail_vars)))])
    c = int(rng.integers(lo[v], hi[v] + 1))
    new_tree = edit_grow(tree, leaf, SplitRule(v, c))

    rows = ctx.rows[leaf]
    d = ctx.depth[leaf]
    mask = data.cut_positions[rows, v] <= c
    left_rows, right_rows = rows[mask], rows[~mask]

    new_prior = math.log(split_prob(d, spec.alpha, spec.beta))
    new_prior -= math.log(len(avail_vars)) + math.log(int(counts[v]))
    for child_rows in (left_rows, right_rows):
        has = bool(data.split_counts(child_rows, spec.min_leaf).any())
        new_prior += _leaf_factor(has, d + 1, spec)
    old_prior = _leaf_factor(True, d, spec)

    log_q_fwd = _log(move_probs[0]) - math.log(len(candidates))
    log_q_fwd -= math.log(len(avail_vars)) + math.log(int(counts[v]))
    # the grown node becomes a nog; its parent stops being one iff the sibling is a leaf
    n_nog_new = len(ctx.nogs) + 1 - int(ctx.parent[leaf] in ctx.nogs)
    log_q_rev = _log(move_probs[1]) - math.log(n_nog_new)
    return Proposal(
        "grow",
        True,
        new_tree,
        log_proposal_ratio=log_q_rev - log_q_fwd,
        log_prior_ratio=new_prior - old_prior,
        old_leaf_rows=[rows],
        new_leaf_rows=[left_rows, right_rows],
    )


def _propose_prune(rng, tree, ctx, data, spec, move_probs):
    nogs = ctx.nogs
    if not nogs:
        return Proposal("prune", False)
    nid = nogs[int(rng.integers(len(nogs)))]
    node = tree.nodes[nid]
    new_tree = edit_prune(tree, nid)

    rows = ctx.rows[nid]
    d = ctx.depth[nid]
    lo, hi = ctx.avail(nid)
    counts = np.maximum(hi - lo + 1, 0)
    avail_vars = np.flatnonzero(counts)
    v = node.rule.variable

    old_prior = math.log(split_prob(d, spec.alpha, spec.beta))
    old_prior -= math.log(len(avail_vars)) + math.log(int(counts[v]))
    for child in (node.left, node.right):
        old_prior += _leaf_factor(ctx.growable(child), d + 1, spec)
    new_prior = _leaf_factor(True, d, spec)  # its rule was available, so it can grow back

    n_grow_new = (
        len(ctx.growable_leaves())
        - int(ctx.growable(node.left))
        - int(ctx.growable(node.right))
        + 1
    )
    log_q_fwd = _log(move_probs[1]) - math.log(len(nogs))
    log_q_rev = _log(move_probs[0]) - math.log(n_grow_new)
    log_q_rev -= math.log(len(avail_vars)) + math.log(int(counts[v]))
    return Proposal(
        "prune",
        True,
        new_tree,
        log_proposal_ratio=log_q_rev - log_q_fwd,
        log_prior_ratio=new_prior - old_prior,
        old_leaf_rows=[ctx.rows[node.left], ctx.rows[node.right]],
        new_leaf_rows=[rows],
    )


def _propose_change(rng, tree, ctx, data, spec):
    interiors = ctx.interiors
    if not interiors:
        return Proposal("change", False)
    nid = interiors[int(rng.integers(len(interiors)))]
    node = tree.nodes[nid]
    lo, hi = ctx.avail(nid)
    counts = np.maximum(hi - lo + 1, 0)
    avail_vars = np.flatnonzero(counts)
    v = int(avail_vars[int(rng.integers(len(avail_vars)))])
    c = int(rng.integers(lo[v], hi[v] + 1))
    new_tree = edit_change(tree, nid, SplitRule(v, c))

    scan_new = _subtree_scan(new_tree, nid, ctx.rows[nid], ctx.depth[nid], data, spec)
    if scan_new is None:
        return Proposal("change", False)
    old_logp, old_rows = _subtree_scan_cached(ctx, nid, spec)
    new_logp, new_rows = scan_new
    # availability at the node is unchanged, so the selection probabilities of the
    # old and new rules differ only through their cutpoint counts
    log_ratio = math.log(int(counts[v])) - math.log(int(counts[node.rule.variable]))
    return Proposal(
        "change",
        True,
        new_tree,
        log_proposal_ratio=log_ratio,
        log_prior_ratio=new_logp - old_logp,
        old_leaf_rows=old_rows,
        new_leaf_rows=new_rows,
    )


def _propose_swap(rng, tree, ctx, data, spec):
    pairs = []
    for nid in ctx.interiors:
        node = tree.nodes[nid]
        for child in (node.left, node.right):
            if isinstance(tree.nodes[child], Interior):
                pairs.append((nid, child))
    if not pairs:
        return Proposal("swap", False)
    parent_id, child_id = pairs[int(rng.integers(len(pairs)))]
    parent = tree.nodes[parent_id]
    child = tree.nodes[child_id]
    sibling_id = parent.right if child_id == parent.left else parent.left
    sibling = tree.nodes[sibling_id]

    both_interior = isinstance(sibling, Interior)
    if both_interior and sibling.rule == child.rule:
        # identical-rule children: the parent rule is exchanged with both of them,
        # which is its own inverse (the reverse pick hits the same corner case)
        new_tree = edit_change(tree, parent_id, child.rule)
        new_tree = edit_change(new_tree, parent.left, parent.rule)
        new_tree = edit_change(new_tree, parent.right, parent.rule)
    else:
        if both_interior and sibling.rule == parent.rule and child.rule != parent.rule:
            # the exchange would leave identical-rule interior children, forcing the
            # reverse pick into the corner variant, which cannot restore this tree:
            # reverse probability zero, so the move auto-rejects
            return Proposal("swap", False)
        new_tree = edit_swap(tree, parent_id, child_id)

    scan_new = _subtree_scan(new_tree, parent_id, ctx.rows[parent_id], ctx.depth[parent_id], data, spec)
    if scan_new is None:
        return Proposal("swap", False)
    old_logp, old_rows = _subtree_scan_cached(ctx, parent_id, spec)
    new_logp, new_rows = scan_new
    # pair counts match between the trees and corner multiplicities cancel
    return Proposal(
        "swap",
        True,
        new_tree,
        log_proposal_ratio=0.0,
        log_prior_ratio=new_logp - old_logp,
        old_leaf_rows=old_rows,
        new_leaf_rows=new_rows,
    )


def _propose(rng, tree, ctx, data, spec, move_probs, max_leaves):
    u = rng.random() * sum(move_probs)
    acc = 0.0
    kind = len(move_probs) - 1
    for i, p in enumerate(move_probs):
        acc += p
        if u < acc:
            kind = i
            break
    if kind == 0:
        return _propose_grow(rng, tree, ctx, data, spec, move_probs, max_leaves)
    if kind == 1:
        return _propose_prune(rng, tree, ctx, data, spec, move_probs)
    if kind == 2:
        return _propose_change(rng, tree, ctx, data, spec)
    return _propose_swap(rng, tree, ctx, data, spec)


def propose_move(
    rng: np.random.Generator,
    tree: DecisionTree,
    data: Dataset,
    spec: PriorSpec,
    *,
    move_probs: tuple = DEFAULT_MOVE_PROBS,
    max_leaves: int | None = None,
) -> Proposal:
    """Draw one structural proposal with its exact proposal and prior log ratios.

    The move kind is drawn with probabilities ``move_probs``; proposals whose
    reverse is impossible or that would route fewer than ``min_leaf`` rows into
    a leaf come back infeasible and count as rejected steps.
    """
    ctx = _TreeCtx(tree, data, spec.min_leaf)
    return _propose(rng, tree, ctx, data, spec, move_probs, max_leaves)


def _marg_core(rows_list, residuals, sigma2, sigma_mu2) -> float:
    # per-leaf terms that do not cancel between two partitions of the same rows
    total = 0.0
    for rows in rows_list:
        n = len(rows)
        s = float(residuals[rows].sum()) if n else 0.0
        denom = sigma2 + n * sigma_mu2
        total += 0.5 * math.log(sigma2 / denom) + sigma_mu2 * s * s / (2.0 * sigma2 * denom)
    return total


def _accept(rng, prop: Proposal, residuals, sigma, spec) -> bool:
    if not prop.feasible:
        return False
    sigma2 = sigma * sigma
    sigma_mu2 = spec.sigma_mu**2
    delta_marg = _marg_core(prop.new_leaf_rows, residuals, sigma2, sigma_mu2) - _marg_core(
        prop.old_leaf_rows, residuals, sigma2, sigma_mu2
    )
    log_ratio = delta_marg + prop.log_prior_ratio + prop.log_proposal_ratio
    if log_ratio >= 0.0:
        return True
    return math.log(rng.random()) < log_ratio


def draw_tree(
    rng: np.random.Generator,
    tree: DecisionTree,
    residuals: np.ndarray,
    sigma: float,
    spec: PriorSpec,
    data: Dataset,
    *,
    move_probs: tuple = DEFAULT_MOVE_PROBS,
    max_leaves: int | None = None,
) -> DecisionTree:
    """One Metropolis-Hastings step on the tree structure given its partial residuals.

    Targets p(T | R, sigma) proportional to p(T) times the residual marginal
    likelihood with leaf values integrated out; returns the accepted or
    retained tree.
    """
    prop = propose_move(rng, tree, data, spec, move_probs=move_probs, max_leaves=max_leaves)
    if prop.feasible and _accept(rng, prop, residuals, sigma, spec):
        return prop.tree
    return tree


def draw_leaf_values(
    rng: np.random.Generator,
    tree: DecisionTree,
    residuals: np.ndarray,
    sigma: float,
    spec: PriorSpec,
    data: Dataset,
) -> DecisionTree:
    """Redraw every leaf value from its conjugate normal posterior.

    Leaves are independent given the structure; an empty leaf draws from the
    prior N(0, sigma_mu^2).
    """
    stats = leaf_suff_stats(tree, residuals, data)
    mus = _posterior_leaf_draw(rng, stats.count, stats.sum, sigma, spec.sigma_mu)
    return tree.with_leaf_values(dict(zip(tree.leaf_ids(), mus.tolist())))


def _posterior_leaf_draw(rng, counts, sums, sigma, sigma_mu):
    sigma2 = sigma * sigma
    sigma_mu2 = sigma_mu * sigma_mu
    denom = sigma2 + counts * sigma_mu2
    mean = sigma_mu2 * sums / denom
    sd = np.sqrt(sigma2 * sigma_mu2 / denom)
    return mean + sd * rng.standard_normal(len(counts))


class _SlotState:
    """Mutable per-tree bookkeeping inside a chain: the tree, its fitted vector,
    and leaf indexing derived from the (cached) row sets."""

    __slots__ = ("tree", "ctx", "fit", "leaf_ids", "assign_slot", "counts")

    def __init__(self, tree: DecisionTree, data: Dataset, min_leaf: int):
        self.tree = tree
        self._rebuild(data, min_leaf)

    def _rebuild(self, data: Dataset, min_leaf: int):
        self.ctx = _TreeCtx(self.tree, data, min_leaf)
        self.leaf_ids = self.ctx.leaves
        assign = np.empty(data.n, dtype=np.int64)
        counts = np.empty(len(self.leaf_ids))
        for i, nid in enumerate(self.leaf_ids):
            rows = self.ctx.rows[nid]
            assign[rows] = i
            counts[i] = len(rows)
        self.assign_slot = assign
        self.counts = counts
        mus = np.array([self.tree.nodes[nid].mu for nid in self.leaf_ids])
        self.fit = mus[assign]

    def replace_structure(self, tree: DecisionTree, data: Dataset, min_leaf: int):
        self.tree = tree
        self._rebuild(data, min_leaf)

    def replace_leaf_values(self, mus: np.ndarray):
        self.tree = self.tree.with_leaf_values(dict(zip(self.leaf_ids, mus.tolist())))
        self.fit = mus[self.assign_slot]


class _Counters:
    __slots__ = ("proposed", "accepted")

    def __init__(self):
        self.proposed = dict.fromkeys(MOVE_KINDS, 0)
        self.accepted = dict.fromkeys(MOVE_KINDS, 0)

    def rates(self):
        return {
            kind: (self.accepted[kind] / self.proposed[kind] if self.proposed[kind] else None)
            for kind in MOVE_KINDS
        }


def _sweep_engine(
    data: Dataset,
    spec: PriorSpec,
    config: ChainConfig,
    *,
    sigma_init: float,
    sigma_fixed: float | None = None,
    latent_hook=None,
    progress=None,
):
    """Generator over kept sweeps yielding (sweep_index, Ensemble).

    ``latent_hook(rng, fit) -> working response`` runs at the start of every
    sweep when given (probit augmentation); otherwise the working response is
    the dataset's transformed y.
    """
    rng = chain_rng(config.seed, config.chain_index)
    m = spec.num_trees
    n = data.n
    states = [
        _SlotState(DecisionTree.single_leaf(0.0), data, spec.min_leaf) for _ in range(m)
    ]
    y_work = np.array(data.y, dtype=float)
    resid = y_work.copy()  # all-stump initialization has zero fit
    sigma = sigma_fixed if sigma_fixed is not None else sigma_init
    counters = _Counters()
    y_range = (data.scaling[1] - data.scaling[0]) if data.scaling else 1.0

    total = config.burn_in + config.keep * config.thin
    for sweep in range(total):
        if latent_hook is not None:
            fit = y_work - resid
            y_work = latent_hook(rng, fit)
            resid = y_work - fit
        for st in states:
            # the partial residual excludes this tree's current contribution,
            # which must also be the baseline subtracted from `resid` at the end
            old_fit = st.fit
            residuals = resid + old_fit
            prop = _propose(rng, st.tree, st.ctx, data, spec, config.move_probs, config.max_leaves)
            counters.proposed[prop.kind] += 1
            if prop.feasible and _accept(rng, prop, residuals, sigma, spec):
                st.replace_structure(prop.tree, data, spec.min_leaf)
                counters.accepted[prop.kind] += 1
            sums = np.bincount(st.assign_slot, weights=residuals, minlength=len(st.leaf_ids))
            mus = _posterior_leaf_draw(rng, st.counts, sums, sigma, spec.sigma_mu)
            st.replace_leaf_values(mus)
            resid += old_fit - st.fit
        if sigma_fixed is None:
            sigma = draw_sigma(rng, resid, spec)
        if config.recompute_every and (sweep + 1) % config.recompute_every == 0:
            total_fit = np.zeros(n)
            for st in states:
                total_fit += st.fit
            resid = y_work - total_fit
        if progress is not None:
            progress(
                {
                    "sweep": sweep,
                    "sigma": sigma * y_range,
                    "mean_depth": float(np.mean([st.tree.max_depth() for st in states])),
                    "accept_rates": counters.rates(),
                }
            )
        post = sweep - config.burn_in
        if post >= 0 and (post + 1) % config.thin == 0:
            yield sweep, Ensemble(tuple(st.tree for st in states), sigma)


def iterate_chain(
    data: Dataset,
    spec: PriorSpec,
    config: ChainConfig,
    *,
    sigma_fixed: float | None = None,
    progress=None,
):
    """Stream the kept states of a regression chain without storing them.

    Yields ``(sweep_index, Ensemble)``; useful for long runs where only online
    summaries are wanted.  ``sigma_fixed`` pins the noise scale instead of
    drawing it (used by exactness tests and the probit sampler).
    """
    if spec.mode != "regression":
        raise BartError("iterate_chain runs regression mode; see run_probit_chain")
    sigma_init = spec.sigma_hat if sigma_fixed is None else sigma_fixed
    return _sweep_engine(
        data,
        spec,
        config,
        sigma_init=sigma_init,
        sigma_fixed=sigma_fixed,
        progress=progress,
    )


def run_chain(
    data: Dataset,
    spec: PriorSpec,
    config: ChainConfig,
    mode: str = "regression",
    progress=None,
) -> PosteriorDraws:
    """Run the backfitting sampler and collect the kept posterior draws.

    Initializes all trees as single leaves at zero with sigma at its rough
    estimate, runs ``burn_in + keep*thin`` sweeps, and records every thin-th
    post-burn-in ensemble.  Fully deterministic given the seed.
    """
    if mode == "probit":
        from .probit import run_probit_chain

        return run_probit_chain(data, spec, config, progress=progress)
    if data.mode != "regression" or spec.mode != "regression":
        raise BartError("regression chain requires regression-mode data and prior")
    ensembles = tuple(ens for _, ens in iterate_chain(data, spec, config, progress=progress))
    return PosteriorDraws(
        ensembles=ensembles,
        grids=data.grids,
        scaling=data.scaling,
        mode="regression",
        spec=spec,
        config=config,
        columns=data.columns,
        response_name=data.response_name,
        offset=0.0,
    )

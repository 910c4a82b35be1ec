"""Binary decision trees over cutpoint grids, plus the structural edits used by proposals.

A tree stores its nodes in an arena (a flat tuple); node ids are indices into
that arena and are stable for the lifetime of the tree value.  Trees are
immutable: every edit returns a new tree and never mutates its input, so a
rejected proposal needs no rollback.

Routing convention: a row goes left iff ``x[variable] <= grids[variable][cutpoint]``.
Cutpoints are referenced by index into a per-variable grid owned by the
dataset, never stored as raw values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructuralEditError


@dataclass(frozen=True, slots=True)
class SplitRule:
    """An axis-aligned split: descend left iff x[variable] <= grid value at cutpoint."""

    variable: int
    cutpoint: int


@dataclass(frozen=True, slots=True)
class Interior:
    rule: SplitRule
    left: int
    right: int


@dataclass(frozen=True, slots=True)
class Leaf:
    mu: float


@dataclass(frozen=True)
class DecisionTree:
    """A binary regression tree: interior split rules and scalar leaf values.

    ``nodes`` is the arena; ``root`` is the id of the root node.  Leaf values
    are on the scale of the (transformed) response.
    """

    nodes: tuple
    root: int = 0

    @staticmethod
    def single_leaf(mu: float = 0.0) -> "DecisionTree":
        return DecisionTree(nodes=(Leaf(mu),), root=0)

    def node(self, nid: int):
        return self.nodes[nid]

    def is_leaf(self, nid: int) -> bool:
        return isinstance(self.nodes[nid], Leaf)

    def leaf_ids(self) -> list[int]:
        return [i for i in self._reachable() if isinstance(self.nodes[i], Leaf)]

    def interior_ids(self) -> list[int]:
        return [i for i in self._reachable() if isinstance(self.nodes[i], Interior)]

    def nog_ids(self) -> list[int]:
        """Interior nodes whose children are both leaves (the only legal prune targets)."""
        out = []
        for i in self._reachable():
            node = self.nodes[i]
            if isinstance(node, Interior) and self.is_leaf(node.left) and self.is_leaf(node.right):
                out.append(i)
        return out

    @property
    def num_leaves(self) -> int:
        return len(self.leaf_ids())

    def depths(self) -> dict[int, int]:
        """Depth of every reachable node (root = 0), in preorder."""
        out = {}
        stack = [(self.root, 0)]
        while stack:
            nid, d = stack.pop()
            out[nid] = d
            node = self.nodes[nid]
            if isinstance(node, Interior):
                stack.append((node.right, d + 1))
                stack.append((node.left, d + 1))
        return out

    def max_depth(self) -> int:
        return max(self.depths().values())

    def parent_of(self, nid: int) -> int | None:
        for i in self._reachable():
            node = self.nodes[i]
            if isinstance(node, Interior) and nid in (node.left, node.right):
                return i
        return None

    def leaf_values(self) -> np.ndarray:
        return np.array([self.nodes[i].mu for i in self.leaf_ids()])

    def with_leaf_values(self, values: dict[int, float]) -> "DecisionTree":
        """New tree with the given leaf mus replaced; node ids are preserved."""
        nodes = list(self.nodes)
        for nid, mu in values.items():
            if not isinstance(nodes[nid], Leaf):
                raise StructuralEditError(f"node {nid} is not a leaf")
            nodes[nid] = Leaf(float(mu))
        return DecisionTree(tuple(nodes), self.root)

    def structure_key(self) -> tuple:
        """Canonical encoding of topology and rules, ignoring leaf values."""

        def rec(nid):
            node = self.nodes[nid]
            if isinstance(node, Leaf):
                return ("L",)
            return ("I", node.rule.variable, node.rule.cutpoint, rec(node.left), rec(node.right))

        return rec(self.root)

    def _reachable(self) -> list[int]:
        out = []
        stack = [self.root]
        while stack:
            nid = stack.pop()
            out.append(nid)
            node = self.nodes[nid]
            if isinstance(node, Interior):
                stack.append(node.right)
                stack.append(node.left)
        return out


@dataclass(frozen=True)
class Ensemble:
    """One posterior state: an ordered forest of trees plus the noise scale sigma
    (on the transformed response scale)."""

    trees: tuple
    sigma: float

    @property
    def num_trees(self) -> int:
        return len(self.trees)


def grid_positions(x: np.ndarray, grids) -> np.ndarray:
    """Map raw predictor values onto integer grid positions.

    ``positions[i, v] <= c`` is exactly equivalent to ``x[i, v] <= grids[v][c]``,
    so all routing can run on integers.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    n, p = x.shape
    pos = np.empty((n, p), dtype=np.int32)
    for v in range(p):
        pos[:, v] = np.searchsorted(np.asarray(grids[v]), x[:, v], side="left")
    return pos


def leaf_assignments(tree: DecisionTree, pos: np.ndarray) -> np.ndarray:
    """Arena id of the leaf each row lands in.  ``pos`` is a grid-position matrix."""
    n = pos.shape[0]
    out = np.empty(n, dtype=np.int32)
    stack = [(tree.root, np.arange(n))]
    while stack:
        nid, rows = stack.pop()
        node = tree.nodes[nid]
        if isinstance(node, Leaf):
            out[rows] = nid
        else:
            left = pos[rows, node.rule.variable] <= node.rule.cutpoint
            stack.append((node.left, rows[left]))
            stack.append((node.right, rows[~left]))
    return out


def evaluate_tree(tree: DecisionTree, pos: np.ndarray) -> np.ndarray:
    """Leaf value assigned to each row of a grid-position matrix."""
    root = tree.nodes[tree.root]
    if isinstance(root, Leaf):
        return np.full(pos.shape[0], root.mu)
    left, right = tree.nodes[root.left], tree.nodes[root.right]
    if isinstance(left, Leaf) and isinstance(right, Leaf):
        go_left = pos[:, root.rule.variable] <= root.rule.cutpoint
        return np.where(go_left, left.mu, right.mu)
    table = np.zeros(len(tree.nodes))
    for i, node in enumerate(tree.nodes):
        if isinstance(node, Leaf):
            table[i] = node.mu
    return table[leaf_assignments(tree, pos)]


def assign_leaf(tree: DecisionTree, x, grids) -> int:
    """Route a single predictor row to its leaf; returns the leaf's node id."""
    nid = tree.root
    node = tree.nodes[nid]
    while isinstance(node, Interior):
        v, c = node.rule.variable, node.rule.cutpoint
        nid = node.left if x[v] <= grids[v][c] else node.right
        node = tree.nodes[nid]
    return nid


def evaluate_forest(ens: Ensemble, x, grids) -> float:
    """Sum of the leaf values assigned to ``x`` by every tree in the ensemble."""
    return float(sum(t.nodes[assign_leaf(t, x, grids)].mu for t in ens.trees))


def partition(tree: DecisionTree, data) -> dict[int, np.ndarray]:
    """Map each leaf id to the indices of the dataset rows routed to it.

    The row sets are disjoint and cover all rows.
    """
    assign = leaf_assignments(tree, data.cut_positions)
    order = np.argsort(assign, kind="stable")
    sorted_assign = assign[order]
    out = {}
    for nid in tree.leaf_ids():
        lo = np.searchsorted(sorted_assign, nid, side="left")
        hi = np.searchsorted(sorted_assign, nid, side="right")
        out[nid] = order[lo:hi]
    return out


def edit_grow(tree: DecisionTree, leaf_id: int, rule: SplitRule) -> DecisionTree:
    """Replace a leaf with an interior node and two fresh leaves (mu drawn later)."""
    if not (0 <= leaf_id < len(tree.nodes)) or not tree.is_leaf(leaf_id):
        raise StructuralEditError(f"grow target {leaf_id} is not a leaf")
    nodes = list(tree.nodes)
    n = len(nodes)
    nodes[leaf_id] = Interior(rule, n, n + 1)
    nodes.extend([Leaf(0.0), Leaf(0.0)])
    return DecisionTree(tuple(nodes), tree.root)


def edit_prune(tree: DecisionTree, interior_id: int) -> DecisionTree:
    """Collapse an interior node whose children are both leaves back to a leaf."""
    node = tree.nodes[interior_id] if 0 <= interior_id < len(tree.nodes) else None
    if not isinstance(node, Interior):
        raise StructuralEditError(f"prune target {interior_id} is not interior")
    if not (tree.is_leaf(node.left) and tree.is_leaf(node.right)):
        raise StructuralEditError(f"prune target {interior_id} has non-leaf children")
    nodes = list(tree.nodes)
    nodes[interior_id] = Leaf(0.0)
    return _compact(nodes, tree.root)


def edit_change(tree: DecisionTree, interior_id: int, rule: SplitRule) -> DecisionTree:
    """Replace the rule of an interior node in place."""
    node = tree.nodes[interior_id] if 0 <= interior_id < len(tree.nodes) else None
    if not isinstance(node, Interior):
        raise StructuralEditError(f"change target {interior_id} is not interior")
    nodes = list(tree.nodes)
    nodes[interior_id] = Interior(rule, node.left, node.right)
    return DecisionTree(tuple(nodes), tree.root)


def edit_swap(tree: DecisionTree, parent_id: int, child_id: int) -> DecisionTree:
    """Exchange the rules of an interior parent and one of its interior children."""
    parent = tree.nodes[parent_id] if 0 <= parent_id < len(tree.nodes) else None
    if not isinstance(parent, Interior):
        raise StructuralEditError(f"swap parent {parent_id} is not interior")
    if child_id not in (parent.left, parent.right):
        raise StructuralEditError(f"{child_id} is not a child of {parent_id}")
    child = tree.nodes[child_id]
    if not isinstance(child, Interior):
        raise StructuralEditError(f"swap child {child_id} is not interior")
    nodes = list(tree.nodes)
    nodes[parent_id] = Interior(child.rule, parent.left, parent.right)
    nodes[child_id] = Interior(parent.rule, child.left, child.right)
    return DecisionTree(tuple(nodes), tree.root)


def validate_tree(tree: DecisionTree) -> None:
    """Check the structural invariants; raises StructuralEditError on violation."""
    seen = set()
    n_leaf = n_int = 0
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise StructuralEditError(f"node {nid} reached twice (cycle or shared child)")
        seen.add(nid)
        node = tree.nodes[nid]
        if isinstance(node, Leaf):
            n_leaf += 1
            if not np.isfinite(node.mu):
                raise StructuralEditError(f"leaf {nid} has non-finite value {node.mu}")
        else:
            n_int += 1
            stack.append(node.right)
            stack.append(node.left)
    if n_leaf != n_int + 1:
        raise StructuralEditError(f"{n_leaf} leaves but {n_int} interior nodes")
    if len(seen) != len(tree.nodes):
        raise StructuralEditError("arena contains unreachable nodes")


def _compact(nodes: list, root: int) -> DecisionTree:
    """Rebuild the arena keeping only nodes reachable from the root, in preorder."""
    remap = {}
    order = []
    stack = [root]
    while stack:
        nid = stack.pop()
        remap[nid] = len(order)
        order.append(nid)
        node = nodes[nid]
        if isinstance(node, Interior):
            stack.append(node.right)
            stack.append(node.left)
    new_nodes = []
    for nid in order:
        node = nodes[nid]
        if isinstance(node, Interior):
            new_nodes.append(Interior(node.rule, remap[node.left], remap[node.right]))
        else:
            new_nodes.append(node)
    return DecisionTree(tuple(new_nodes), 0)

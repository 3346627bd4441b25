"""Binary regression trees: mutable sampler-side nodes and frozen forests.

During sampling each tree is a linked structure whose every node keeps
the training rows routed to it, so move proposals can read sufficient
statistics in O(subtree). Retained posterior draws are packed into flat
integer/float arrays (`FlatForest`) that are cheap to store, serialize,
and evaluate.

Split convention: a row goes left when ``x[split_var] <= split_value``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


class Node:
    """Tree node; a leaf when ``var == LEAF``, else an internal split."""

    __slots__ = ("var", "value", "left", "right", "rows", "mu")

    def __init__(self, rows, mu=0.0):
        self.var = LEAF
        self.value = 0.0
        self.left = None
        self.right = None
        self.rows = rows  # training row indices routed through this node
        self.mu = mu

    @property
    def is_leaf(self):
        return self.var == LEAF

    def split(self, var, value, left_rows, right_rows):
        self.var = var
        self.value = value
        self.left = Node(left_rows, mu=self.mu)
        self.right = Node(right_rows, mu=self.mu)

    def collapse(self, mu=0.0):
        self.var = LEAF
        self.value = 0.0
        self.left = None
        self.right = None
        self.mu = mu


class Tree:
    """One ensemble member: a root node over the training rows."""

    def __init__(self, n_rows):
        self.root = Node(np.arange(n_rows))

    def leaves(self):
        """All (node, depth, parent) leaf triples in depth-first order."""
        out = []
        stack = [(self.root, 0, None)]
        while stack:
            node, depth, parent = stack.pop()
            if node.is_leaf:
                out.append((node, depth, parent))
            else:
                stack.append((node.right, depth + 1, node))
                stack.append((node.left, depth + 1, node))
        return out[::-1]

    def prunable(self):
        """Internal nodes whose children are both leaves, with depths."""
        out = []
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            if node.is_leaf:
                continue
            if node.left.is_leaf and node.right.is_leaf:
                out.append((node, depth))
            stack.append((node.right, depth + 1))
            stack.append((node.left, depth + 1))
        return out[::-1]

    def n_leaves(self):
        return len(self.leaves())

    def depth(self):
        return max(d for _, d, _ in self.leaves())

    def training_fit(self, n_rows):
        """Per-row fitted value over the training data."""
        fit = np.empty(n_rows, dtype=float)
        for node, _, _ in self.leaves():
            fit[node.rows] = node.mu
        return fit

    def structure(self):
        """Hashable structural signature (splits and topology, no leaf values)."""
        def walk(node):
            if node.is_leaf:
                return ("leaf",)
            return ("split", node.var, node.value, walk(node.left), walk(node.right))

        return walk(self.root)


@dataclass(frozen=True)
class FlatForest:
    """A forest draw packed into parallel node arrays.

    ``var[i] == -1`` marks node ``i`` as a leaf whose value is ``value[i]``;
    otherwise ``value[i]`` is the split threshold on covariate ``var[i]``
    and ``left``/``right`` index the child nodes. ``roots`` holds each
    tree's root node index.
    """

    var: np.ndarray
    value: np.ndarray
    left: np.ndarray
    right: np.ndarray
    roots: np.ndarray

    @property
    def n_trees(self):
        return len(self.roots)

    def tree_leaf_values(self):
        return self.value[self.var == LEAF]

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Sum-of-trees value for every row of X."""
        n = X.shape[0]
        total = np.zeros(n, dtype=float)
        for root in self.roots:
            node = np.full(n, root, dtype=np.int64)
            while True:
                split_var = self.var[node]
                active = split_var != LEAF
                if not active.any():
                    break
                idx = np.nonzero(active)[0]
                cur = node[idx]
                go_left = X[idx, self.var[cur]] <= self.value[cur]
                node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            total += self.value[node]
        return total

    def to_payload(self) -> dict:
        return {
            "var": self.var.tolist(),
            "value": self.value.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "roots": self.roots.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "FlatForest":
        return cls(
            var=np.asarray(payload["var"], dtype=np.int32),
            value=np.asarray(payload["value"], dtype=float),
            left=np.asarray(payload["left"], dtype=np.int32),
            right=np.asarray(payload["right"], dtype=np.int32),
            roots=np.asarray(payload["roots"], dtype=np.int32),
        )


def flatten_forest(trees) -> FlatForest:
    """Pack live trees into a FlatForest snapshot."""
    var, value, left, right, roots = [], [], [], [], []

    def add(node):
        i = len(var)
        var.append(node.var)
        value.append(node.mu if node.is_leaf else node.value)
        left.append(-1)
        right.append(-1)
        if not node.is_leaf:
            left[i] = add(node.left)
            right[i] = add(node.right)
        return i

    for tree in trees:
        roots.append(add(tree.root))
    return FlatForest(
        var=np.asarray(var, dtype=np.int32),
        value=np.asarray(value, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        roots=np.asarray(roots, dtype=np.int32),
    )


def single_split_forest(var, split_value, mu_left, mu_right, n_extra_leaf_trees=0):
    """Hand-built one-tree forest (plus optional zero-leaf trees) for tests."""
    var_arr = [var] + [LEAF] * (2 + n_extra_leaf_trees)
    value = [split_value, mu_left, mu_right] + [0.0] * n_extra_leaf_trees
    left = [1] + [-1] * (2 + n_extra_leaf_trees)
    right = [2] + [-1] * (2 + n_extra_leaf_trees)
    roots = [0] + [3 + i for i in range(n_extra_leaf_trees)]
    return FlatForest(
        var=np.asarray(var_arr, dtype=np.int32),
        value=np.asarray(value, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        roots=np.asarray(roots, dtype=np.int32),
    )

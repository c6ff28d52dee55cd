"""Greedy binary classification tree with depth and leaf-count limits.

Splits minimize weighted Gini impurity of the children; candidate
thresholds are midpoints between consecutive distinct sorted values. Ties
(equal impurity decrease) go to the lowest feature index, then the lowest
threshold; tied leaf labels go to the lowest class index, so induction is
fully deterministic.

Growth is depth-first when only ``max_depth`` applies. When ``max_leaves``
is set, growth switches to best-first: the frontier node whose split would
remove the most total impurity is expanded next, until the leaf budget is
spent. Rule extraction walks the finished tree depth-first (left child
first), one rule per leaf.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import OP_GT, OP_LE, Rule, Term, matrix_values
from .errors import DimMismatchError, EmptyDatasetError


@dataclass(frozen=True)
class TreeParams:
    """Induction limits. ``seed`` is carried for provenance; the algorithm
    itself is deterministic and draws no random numbers."""

    max_depth: int | None = None
    max_leaves: int | None = None
    min_samples_split: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.max_leaves is not None and self.max_leaves < 2:
            raise ValueError(f"max_leaves must be >= 2, got {self.max_leaves}")
        if self.min_samples_split < 2:
            raise ValueError(
                f"min_samples_split must be >= 2, got {self.min_samples_split}"
            )

    def as_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "max_leaves": self.max_leaves,
            "min_samples_split": self.min_samples_split,
            "seed": self.seed,
        }


class DecisionTree:
    """Flat-array binary tree; node 0 is the root, feature -1 marks a leaf."""

    def __init__(self, feature, threshold, left, right, label, n_samples,
                 hist, depth, n_features: int, n_classes: int):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.label = np.asarray(label, dtype=np.int64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.hist = np.asarray(hist, dtype=np.int64)
        self.depth_of = np.asarray(depth, dtype=np.int64)
        self.n_features = n_features
        self.n_classes = n_classes

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def depth(self) -> int:
        return int(self.depth_of[self.feature < 0].max())

    def predict(self, x) -> int:
        """Route a single row to its leaf label (``<=`` goes left)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DimMismatchError(
                f"expected row of width {self.n_features}, got shape {x.shape}"
            )
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(self.label[node])

    def predict_rows(self, X) -> np.ndarray:
        X = matrix_values(X)
        if X.shape[1] != self.n_features:
            raise DimMismatchError(
                f"expected {self.n_features} columns, got {X.shape[1]}"
            )
        leaves = kernels.route_rows(self.feature, self.threshold,
                                    self.left, self.right, X)
        return self.label[leaves]

    def to_text(self) -> str:
        """Indented dump for debugging; not a stable format."""
        lines = []
        stack = [(0, 0)]
        while stack:
            node, indent = stack.pop()
            pad = "  " * indent
            if self.feature[node] < 0:
                lines.append(
                    f"{pad}leaf label={self.label[node]} n={self.n_samples[node]}"
                )
            else:
                lines.append(
                    f"{pad}f{self.feature[node]} <= {float(self.threshold[node])!r}"
                    f" n={self.n_samples[node]}"
                )
                stack.append((int(self.right[node]), indent + 1))
                stack.append((int(self.left[node]), indent + 1))
        return "\n".join(lines)


class _Builder:
    def __init__(self, X: np.ndarray, y: np.ndarray, params: TreeParams,
                 n_classes: int):
        self.X = X
        self.y = y
        self.params = params
        self.n_classes = n_classes
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.label: list[int] = []
        self.n_samples: list[int] = []
        self.hist: list[np.ndarray] = []
        self.depth: list[int] = []

    def new_node(self, rows: np.ndarray, depth: int) -> int:
        h = np.bincount(self.y[rows], minlength=self.n_classes)
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.label.append(int(np.argmax(h)))
        self.n_samples.append(len(rows))
        self.hist.append(h)
        self.depth.append(depth)
        return node

    def splittable(self, node: int, rows: np.ndarray) -> bool:
        p = self.params
        if len(rows) < p.min_samples_split:
            return False
        if p.max_depth is not None and self.depth[node] >= p.max_depth:
            return False
        return int((self.hist[node] > 0).sum()) > 1  # pure node -> leaf

    def best_split(self, rows: np.ndarray):
        feat, thresh, delta = kernels.find_best_split(
            self.X, rows, self.y, self.n_classes
        )
        return int(feat), float(thresh), float(delta)

    def apply_split(self, node: int, rows: np.ndarray, feat: int, thresh: float):
        go_left = self.X[rows, feat] <= thresh
        left_rows = rows[go_left]
        right_rows = rows[~go_left]
        d = self.depth[node] + 1
        l_id = self.new_node(left_rows, d)
        r_id = self.new_node(right_rows, d)
        self.feature[node] = feat
        self.threshold[node] = thresh
        self.left[node] = l_id
        self.right[node] = r_id
        return l_id, left_rows, r_id, right_rows

    def build_depth_first(self):
        root_rows = np.arange(len(self.y), dtype=np.int64)
        stack = [(self.new_node(root_rows, 0), root_rows)]
        while stack:
            node, rows = stack.pop()
            if not self.splittable(node, rows):
                continue
            feat, thresh, _ = self.best_split(rows)
            if feat < 0:
                continue
            l_id, l_rows, r_id, r_rows = self.apply_split(node, rows, feat, thresh)
            stack.append((r_id, r_rows))
            stack.append((l_id, l_rows))

    def build_best_first(self, max_leaves: int):
        # Frontier of candidate expansions ranked by total impurity removed
        # (node size x per-node Gini decrease); insertion order breaks ties.
        counter = 0
        frontier: list[tuple[float, int, int, int, float, np.ndarray]] = []

        def consider(node: int, rows: np.ndarray):
            nonlocal counter
            if not self.splittable(node, rows):
                return
            feat, thresh, delta = self.best_split(rows)
            if feat < 0:
                return
            heapq.heappush(
                frontier, (-(len(rows) * delta), counter, node, feat, thresh, rows)
            )
            counter += 1

        root_rows = np.arange(len(self.y), dtype=np.int64)
        consider(self.new_node(root_rows, 0), root_rows)
        leaves = 1
        while frontier and leaves < max_leaves:
            _, _, node, feat, thresh, rows = heapq.heappop(frontier)
            l_id, l_rows, r_id, r_rows = self.apply_split(node, rows, feat, thresh)
            leaves += 1
            consider(l_id, l_rows)
            consider(r_id, r_rows)

    def finish(self) -> DecisionTree:
        return DecisionTree(
            self.feature, self.threshold, self.left, self.right, self.label,
            self.n_samples, np.vstack(self.hist), self.depth,
            n_features=self.X.shape[1], n_classes=self.n_classes,
        )


def fit(X, y, params: TreeParams, n_classes: int | None = None) -> DecisionTree:
    """Grow a tree on (X, y). X must be finite; y holds class indices."""
    Xv = matrix_values(X)
    y = np.asarray(y, dtype=np.int64)
    if Xv.shape[0] == 0:
        raise EmptyDatasetError("cannot fit a tree on zero rows")
    if Xv.shape[0] != len(y):
        raise DimMismatchError(f"{Xv.shape[0]} rows but {len(y)} labels")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    b = _Builder(Xv, y, params, n_classes)
    if params.max_leaves is not None:
        b.build_best_first(params.max_leaves)
    else:
        b.build_depth_first()
    return b.finish()


def extract_rules(tree: DecisionTree) -> list[Rule]:
    """One rule per leaf, in depth-first pre-order (left subtree first).

    A leaf's terms are the tightest bounds along its root path: at most one
    ``<=`` and one ``>`` per feature, already canonical.
    """
    n_feat = tree.n_features
    rules: list[Rule] = []
    init_lower = np.full(n_feat, -np.inf)
    init_upper = np.full(n_feat, np.inf)
    stack: list[tuple[int, np.ndarray, np.ndarray]] = [(0, init_lower, init_upper)]
    while stack:
        node, lower, upper = stack.pop()
        f = int(tree.feature[node])
        if f < 0:
            terms = []
            for j in range(n_feat):
                if upper[j] < np.inf:
                    terms.append(Term(j, OP_LE, float(upper[j])))
                if lower[j] > -np.inf:
                    terms.append(Term(j, OP_GT, float(lower[j])))
            terms.sort(key=lambda t: (t.feature, t.op))
            rules.append(Rule(terms, int(tree.label[node])))
            continue
        t = float(tree.threshold[node])
        l_upper = upper.copy()
        l_upper[f] = min(l_upper[f], t)
        r_lower = lower.copy()
        r_lower[f] = max(r_lower[f], t)
        # LIFO: push right first so the left child is visited first
        stack.append((int(tree.right[node]), r_lower, upper))
        stack.append((int(tree.left[node]), lower, l_upper))
    return rules


"""Independent oracles shared by the test modules.

Everything here re-implements behavior from first principles (plain
loops over Term semantics, comprehensive all-rules matching, random tree
construction) so the production kernels are checked against code that
shares none of their implementation.
"""

from __future__ import annotations

import numpy as np

from xrules.core import OP_GT, OP_LE, Rule, Ruleset, Term, rule_matches


def match_matrix(ruleset: Ruleset, X: np.ndarray) -> np.ndarray:
    """(n, n_rules) bool matrix of every rule evaluated on every row."""
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros((X.shape[0], len(ruleset.rules)), dtype=bool)
    for j, rule in enumerate(ruleset.rules):
        for i in range(X.shape[0]):
            out[i, j] = rule_matches(rule, X[i])
    return out


def comprehensive_classify(ruleset: Ruleset, X: np.ndarray,
                           order=None) -> np.ndarray:
    """All-rules evaluation oracle: first rule in `order` that matches wins."""
    m = match_matrix(ruleset, X)
    if order is None:
        order = range(len(ruleset.rules))
    labels = np.full(X.shape[0], ruleset.fallback, dtype=np.int64)
    for i in range(X.shape[0]):
        for j in order:
            if m[i, j]:
                labels[i] = ruleset.rules[j].label
                break
    return labels


class RandomTree:
    """Hand-rolled random threshold tree, independent of dtree.fit.

    Thresholds are sampled strictly inside the node's current box so every
    leaf region is non-empty within [0, 1]^d.
    """

    def __init__(self, n_features: int, max_depth: int, n_classes: int,
                 rng: np.random.Generator, split_prob: float = 0.8):
        self.n_features = n_features
        self.rng = rng
        self.root = self._grow(max_depth, split_prob, n_classes,
                               np.zeros(n_features), np.ones(n_features))

    def _grow(self, depth_left, split_prob, n_classes, lo, hi):
        if depth_left > 0 and self.rng.random() < split_prob:
            f = int(self.rng.integers(self.n_features))
            lo_f, hi_f = lo[f], hi[f]
            t = float(self.rng.uniform(lo_f + 1e-6, hi_f - 1e-6))
            l_hi = hi.copy()
            l_hi[f] = t
            r_lo = lo.copy()
            r_lo[f] = t
            return (f, t,
                    self._grow(depth_left - 1, split_prob, n_classes, lo, l_hi),
                    self._grow(depth_left - 1, split_prob, n_classes, r_lo, hi))
        return int(self.rng.integers(n_classes))

    def predict(self, x) -> int:
        node = self.root
        while isinstance(node, tuple):
            f, t, left, right = node
            node = left if x[f] <= t else right
        return node

    def to_decision_tree(self, n_classes: int):
        """Convert to the production flat-array DecisionTree."""
        from xrules.dtree import DecisionTree

        feature, threshold, left, right, label, depth = [], [], [], [], [], []

        def add(node, d):
            idx = len(feature)
            depth.append(d)
            if isinstance(node, tuple):
                f, t, l, r = node
                feature.append(f)
                threshold.append(t)
                label.append(0)
                left.append(-1)
                right.append(-1)
                left[idx] = add(l, d + 1)
                right[idx] = add(r, d + 1)
            else:
                feature.append(-1)
                threshold.append(0.0)
                label.append(node)
                left.append(-1)
                right.append(-1)
            return idx

        add(self.root, 0)
        n = len(feature)
        return DecisionTree(feature, threshold, left, right, label,
                            np.zeros(n, dtype=np.int64),
                            np.zeros((n, n_classes), dtype=np.int64),
                            depth, n_features=self.n_features,
                            n_classes=n_classes)

    def rules(self) -> list[Rule]:
        """DFS pre-order rules, mirroring the documented extraction order."""
        out = []

        def walk(node, terms):
            if isinstance(node, tuple):
                f, t, left, right = node
                walk(left, terms + [Term(f, OP_LE, t)])
                walk(right, terms + [Term(f, OP_GT, t)])
            else:
                tight: dict[tuple[int, str], Term] = {}
                for term in terms:
                    key = (term.feature, term.op)
                    if key not in tight:
                        tight[key] = term
                    elif term.op == OP_LE:
                        if term.threshold < tight[key].threshold:
                            tight[key] = term
                    elif term.threshold > tight[key].threshold:
                        tight[key] = term
                canon = sorted(tight.values(), key=lambda t: (t.feature, t.op))
                out.append(Rule(canon, node))

        walk(self.root, [])
        return out


def finite_difference_gradients(model, X, Y, h: float = 1e-5):
    """Central finite differences of the batch loss over every parameter."""
    from xrules.mlp import loss_and_gradient

    grads = []
    for li, (W, b, act) in enumerate(model.layers):
        gW = np.zeros_like(W)
        gb = np.zeros_like(b)
        for arr, out in ((W, gW), (b, gb)):
            flat = arr.ravel()
            gflat = out.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                plus, _ = loss_and_gradient(model, X, Y)
                flat[i] = orig - h
                minus, _ = loss_and_gradient(model, X, Y)
                flat[i] = orig
                gflat[i] = (plus - minus) / (2.0 * h)
        grads.append((gW, gb))
    return grads


def max_relative_gradient_error(analytic, numeric) -> float:
    worst = 0.0
    for (aW, ab), (nW, nb) in zip(analytic, numeric):
        for a, n in ((aW, nW), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst

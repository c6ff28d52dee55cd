"""Greedy ruleset classification and quality reporting.

Samples are classified by the first rule (in the current order) whose
terms all hold; unmatched samples get the ruleset's fallback label. The
evaluation protocol shuffles the rule order per trial to show that the
greedy shortcut is order-robust, and reports two accuracies: against the
black-box model's predictions (fidelity) and against ground truth.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Ruleset, matrix_values
from .errors import DimMismatchError, LengthMismatchError


@dataclass
class MetricBundle:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    fpr: float
    fnr: float
    zero_division: tuple[str, ...]  # metrics whose denominator was zero

    def as_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "fpr": self.fpr, "fnr": self.fnr,
            "zero_division": list(self.zero_division),
        }


@dataclass
class EvalReport:
    trials: int
    sample_count: int
    ground_truth_accuracy: float       # mean over trials
    model_prediction_accuracy: float   # fidelity, mean over trials
    ground_truth_accuracy_per_trial: list[float]
    model_prediction_accuracy_per_trial: list[float]
    ground_truth_accuracy_std: float
    model_prediction_accuracy_std: float
    metrics: MetricBundle              # last trial, vs ground truth
    matched_count: int                 # last trial
    fallback_count: int                # last trial
    avg_rules_checked: float           # last trial
    rule_stats: list[tuple[int, int]]  # (usage, correct) per rule, last trial
    testing_time_mean: float
    testing_time_std: float
    positive_label: int
    correct_against: str
    seed: int

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "sample_count": self.sample_count,
            "ground_truth_accuracy": self.ground_truth_accuracy,
            "model_prediction_accuracy": self.model_prediction_accuracy,
            "ground_truth_accuracy_per_trial": self.ground_truth_accuracy_per_trial,
            "model_prediction_accuracy_per_trial":
                self.model_prediction_accuracy_per_trial,
            "ground_truth_accuracy_std": self.ground_truth_accuracy_std,
            "model_prediction_accuracy_std": self.model_prediction_accuracy_std,
            "metrics": self.metrics.as_dict(),
            "matched_count": self.matched_count,
            "fallback_count": self.fallback_count,
            "avg_rules_checked": self.avg_rules_checked,
            "rule_stats": [list(t) for t in self.rule_stats],
            "testing_time_mean": self.testing_time_mean,
            "testing_time_std": self.testing_time_std,
            "positive_label": self.positive_label,
            "correct_against": self.correct_against,
            "seed": self.seed,
        }


def _std(values) -> float:
    """Population std, shifted for conditioning so identical values give 0.0."""
    arr = np.asarray(values, dtype=np.float64)
    return float(np.std(arr - arr[0])) if arr.size else 0.0


def classify_rows(ruleset: Ruleset, X, order: np.ndarray | None = None):
    """Greedy first-match classification of many rows at once.

    Returns (labels, matched rule index or -1, rules checked) per row.
    ``order`` permutes the scan order; rule indices in the output are
    always original ruleset positions.
    """
    Xv = matrix_values(X)
    if Xv.shape[1] != ruleset.num_features:
        raise DimMismatchError(
            f"ruleset expects {ruleset.num_features} features, got {Xv.shape[1]}"
        )
    packed = ruleset.packed()
    if order is None:
        order = np.arange(packed.n_rules, dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
    return kernels.match_first(
        packed.features, packed.is_upper, packed.thresholds, packed.offsets,
        packed.labels, order, Xv, ruleset.fallback,
    )


def classify_greedy(ruleset: Ruleset, x):
    """Classify one row; returns (label, matched rule index or None).

    Bumps the matched rule's usage counter, mirroring a live deployment
    where usage statistics accumulate as traffic arrives.
    """
    x = np.asarray(x, dtype=np.float64)
    labels, matched, _ = classify_rows(ruleset, x[None, :])
    if matched[0] >= 0:
        ruleset.rules[matched[0]].usage += 1
        return int(labels[0]), int(matched[0])
    return int(labels[0]), None


def confusion_and_metrics(y_true, y_pred, positive: int) -> MetricBundle:
    """Confusion counts and derived rates with the given positive class.

    Zero-denominator metrics come back as 0.0 and are listed in
    ``zero_division`` instead of raising.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise LengthMismatchError(
            f"y_true has {y_true.shape}, y_pred has {y_pred.shape}"
        )
    t = y_true == positive
    p = y_pred == positive
    tp = int((t & p).sum())
    fp = int((~t & p).sum())
    tn = int((~t & ~p).sum())
    fn = int((t & ~p).sum())

    flags = []

    def ratio(num, den, name):
        if den == 0:
            flags.append(name)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    fpr = ratio(fp, fp + tn, "fpr")
    fnr = ratio(fn, fn + tp, "fnr")
    accuracy = ratio(tp + tn, tp + tn + fp + fn, "accuracy")
    return MetricBundle(tp, fp, tn, fn, accuracy, precision, recall, f1,
                        fpr, fnr, tuple(flags))


def evaluate(ruleset: Ruleset, X_test, y_true, y_model, trials: int = 5,
             seed: int = 0, positive_label: int = 1,
             correct_against: str = "truth") -> EvalReport:
    """Shuffled repeated-trial evaluation of a ruleset.

    Each trial shuffles the rule order with the seeded generator, classifies
    every row, and records wall-clock time (classification loop only) plus
    both accuracies. Per-rule usage/correct counters and the confusion
    metrics come from the last trial; ``correct_against`` picks whether a
    rule's ``correct`` counts agreement with ground truth or with the
    model's predictions.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if correct_against not in ("truth", "model"):
        raise ValueError("correct_against must be 'truth' or 'model'")
    Xv = matrix_values(X_test)
    y_true = np.asarray(y_true, dtype=np.int64)
    y_model = np.asarray(y_model, dtype=np.int64)
    n = Xv.shape[0]
    if len(y_true) != n or len(y_model) != n:
        raise LengthMismatchError(
            f"{n} rows but {len(y_true)} true / {len(y_model)} model labels"
        )

    rng = np.random.default_rng(seed)
    n_rules = len(ruleset.rules)
    ruleset.packed()  # build flat arrays outside the timed loop
    gt_acc, fid_acc, times = [], [], []
    labels = matched = checked = None
    for _ in range(trials):
        order = rng.permutation(n_rules).astype(np.int64)
        t0 = time.perf_counter()
        labels, matched, checked = classify_rows(ruleset, Xv, order)
        times.append(time.perf_counter() - t0)
        gt_acc.append(float((labels == y_true).mean()) if n else 0.0)
        fid_acc.append(float((labels == y_model).mean()) if n else 0.0)

    usage = np.bincount(matched[matched >= 0], minlength=n_rules)
    target = y_true if correct_against == "truth" else y_model
    hit = (matched >= 0) & (labels == target)
    correct = np.bincount(matched[hit], minlength=n_rules)
    fallback_count = int((matched < 0).sum())
    if int(usage.sum()) + fallback_count != n:
        raise AssertionError("usage counters do not account for every sample")
    for rule, u, c in zip(ruleset.rules, usage, correct):
        rule.usage = int(u)
        rule.correct = int(c)

    return EvalReport(
        trials=trials,
        sample_count=n,
        ground_truth_accuracy=float(np.mean(gt_acc)),
        model_prediction_accuracy=float(np.mean(fid_acc)),
        ground_truth_accuracy_per_trial=gt_acc,
        model_prediction_accuracy_per_trial=fid_acc,
        ground_truth_accuracy_std=_std(gt_acc),
        model_prediction_accuracy_std=_std(fid_acc),
        metrics=confusion_and_metrics(y_true, labels, positive_label),
        matched_count=n - fallback_count,
        fallback_count=fallback_count,
        avg_rules_checked=float(checked.mean()) if n else 0.0,
        rule_stats=[(int(u), int(c)) for u, c in zip(usage, correct)],
        testing_time_mean=float(np.mean(times)),
        testing_time_std=_std(times),
        positive_label=positive_label,
        correct_against=correct_against,
        seed=seed,
    )


@dataclass
class RuleStat:
    index: int
    text: str
    label: int
    usage: int
    correct: int
    accuracy: float


def rule_report(ruleset: Ruleset, sort_by: str = "usage") -> list[RuleStat]:
    """Rules ranked by usage or accuracy (descending, ties by rule index)."""
    if sort_by not in ("usage", "accuracy"):
        raise ValueError("sort_by must be 'usage' or 'accuracy'")
    stats = [
        RuleStat(i, r.to_text(), r.label, r.usage, r.correct, r.accuracy)
        for i, r in enumerate(ruleset.rules)
    ]
    key = (lambda s: s.usage) if sort_by == "usage" else (lambda s: s.accuracy)
    return sorted(stats, key=lambda s: (-key(s), s.index))

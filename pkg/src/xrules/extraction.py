"""End-to-end ruleset extraction from a trained network.

For each selected hidden layer: train a surrogate tree on (hidden
activations, model predictions), read that tree's rules back over the
activations to relabel the rows, train a second tree on (input features,
those labels), and extract its rules. The per-layer input-space rules are
concatenated in layer order and deduplicated; the fallback label is the
majority class of the model's predictions on the extraction rows.

Extraction cost is controlled four ways: ``max_leaves`` / ``max_depth`` on
both trees of a layer, restricting to a subset of hidden layers, and
subsampling the extraction rows. Per-layer jobs are independent given the
read-only model and data; this implementation runs them sequentially.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import dtree, evaluation, mlp
from .core import FeatureMatrix, Ruleset, dedupe_rules, matrix_values
from .dtree import TreeParams
from .errors import DimMismatchError, LayerOutOfRangeError, TooFewRowsError


@dataclass(frozen=True)
class ExtractionConfig:
    tree_params: TreeParams = field(default_factory=TreeParams)
    layers: tuple[int, ...] | None = None  # None = every hidden layer
    data_fraction: float = 1.0
    subsample_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.data_fraction <= 1.0:
            raise ValueError(
                f"data_fraction must be in (0, 1], got {self.data_fraction}"
            )
        if self.layers is not None and len(self.layers) == 0:
            raise ValueError("layers subset must be non-empty")

    def as_dict(self) -> dict:
        return {
            "tree_params": self.tree_params.as_dict(),
            "layers": list(self.layers) if self.layers is not None else None,
            "data_fraction": self.data_fraction,
            "subsample_seed": self.subsample_seed,
        }


@dataclass
class ExtractionReport:
    ruleset: Ruleset
    per_layer_rule_counts: list[int]  # contribution per layer, before dedupe
    extraction_time: float
    rule_count: int
    average_terms: float
    longest_rule: int

    def as_dict(self) -> dict:
        return {
            "rule_count": self.rule_count,
            "average_terms": self.average_terms,
            "longest_rule": self.longest_rule,
            "per_layer_rule_counts": self.per_layer_rule_counts,
            "extraction_time": self.extraction_time,
        }


def subsample_rows(X, y, fraction: float, seed: int):
    """Seeded uniform sample without replacement of floor(fraction * n) rows.

    Row order is preserved; fraction 1.0 returns the inputs unchanged.
    ``y`` may be None.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return X, y
    Xv = matrix_values(X)
    n = Xv.shape[0]
    m = int(fraction * n)
    if m < 1:
        raise TooFewRowsError(f"fraction {fraction} of {n} rows leaves nothing")
    idx = np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))
    Xs = Xv[idx]
    if isinstance(X, FeatureMatrix):
        Xs = FeatureMatrix(Xs, X.col_names)
    ys = None if y is None else np.asarray(y)[idx]
    return Xs, ys


def extract_ruleset(X, model: mlp.MlpModel,
                    config: ExtractionConfig) -> ExtractionReport:
    """Run the full per-layer extraction and return the deduped ruleset."""
    Xv = matrix_values(X)
    if Xv.shape[1] != model.input_dim:
        raise DimMismatchError(
            f"model expects {model.input_dim} features, data has {Xv.shape[1]}"
        )
    layers = (tuple(range(model.hidden_count)) if config.layers is None
              else tuple(config.layers))
    for li in layers:
        if not 0 <= li < model.hidden_count:
            raise LayerOutOfRangeError(
                f"layer {li} out of range for {model.hidden_count} hidden layers"
            )
    params = config.tree_params

    t0 = time.perf_counter()
    X_sub, _ = subsample_rows(Xv, None, config.data_fraction,
                              config.subsample_seed)
    if X_sub.shape[0] < params.min_samples_split:
        raise TooFewRowsError(
            f"{X_sub.shape[0]} extraction rows < min_samples_split "
            f"{params.min_samples_split}"
        )
    y_model = mlp.predict(model, X_sub)
    k = model.class_count

    all_rules = []
    per_layer = []
    for li in layers:
        hidden = mlp.hidden_activations(model, X_sub, li)
        hidden_dt = dtree.fit(hidden, y_model, params, n_classes=k)
        hidden_rules = dtree.extract_rules(hidden_dt)
        # Relabel through the extracted rules; they tile the activation
        # space, so the first match is the only match.
        hidden_rs = Ruleset(hidden_rules, fallback=_majority(y_model, k),
                            num_features=hidden.cols)
        y_hat, _, _ = evaluation.classify_rows(hidden_rs, hidden.values)
        input_dt = dtree.fit(X_sub, y_hat, params, n_classes=k)
        layer_rules = dtree.extract_rules(input_dt)
        per_layer.append(len(layer_rules))
        all_rules += layer_rules

    final = dedupe_rules(all_rules)
    elapsed = time.perf_counter() - t0

    ruleset = Ruleset(
        final,
        fallback=_majority(y_model, k),
        num_features=Xv.shape[1],
        provenance={
            "config": config.as_dict(),
            "layers_used": list(layers),
            "rows_used": int(X_sub.shape[0]),
            "class_count": k,
        },
    )
    lengths = [len(r.terms) for r in final]
    return ExtractionReport(
        ruleset=ruleset,
        per_layer_rule_counts=per_layer,
        extraction_time=elapsed,
        rule_count=len(final),
        average_terms=float(np.mean(lengths)) if lengths else 0.0,
        longest_rule=max(lengths) if lengths else 0,
    )


def layer_limited_extract(X, model: mlp.MlpModel, config: ExtractionConfig,
                          layer: int) -> ExtractionReport:
    """Extraction restricted to a single hidden layer."""
    limited = ExtractionConfig(
        tree_params=config.tree_params,
        layers=(layer,),
        data_fraction=config.data_fraction,
        subsample_seed=config.subsample_seed,
    )
    return extract_ruleset(X, model, limited)


def _majority(y: np.ndarray, k: int) -> int:
    return int(np.argmax(np.bincount(y, minlength=k)))

"""xrules: human-readable rulesets extracted from feed-forward networks.

Train a small MLP, distill it into per-hidden-layer surrogate decision
trees, read the trees back as IF/THEN threshold rules over the input
features, and measure how faithfully the ruleset mimics the network.
"""

from .core import (
    FeatureMatrix,
    PackedRules,
    Rule,
    Ruleset,
    Term,
    canonicalize_rule,
    dedupe_rules,
    rule_matches,
)
from .dtree import DecisionTree, TreeParams, extract_rules, fit
from .errors import XRulesError
from .evaluation import (
    EvalReport,
    MetricBundle,
    classify_greedy,
    confusion_and_metrics,
    evaluate,
    rule_report,
)
from .extraction import (
    ExtractionConfig,
    ExtractionReport,
    extract_ruleset,
    layer_limited_extract,
    subsample_rows,
)
from .ingest import (
    DatasetBundle,
    EncoderSpec,
    RawTable,
    build_bundle,
    drop_incomplete,
    encode_and_normalize,
    load_csv,
    one_hot_labels,
    split,
)
from .mlp import (
    MlpModel,
    TrainConfig,
    TrainLog,
    forward,
    hidden_activations,
    load_model,
    loss_and_gradient,
    predict,
    save_model,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "FeatureMatrix", "PackedRules", "Rule", "Ruleset", "Term",
    "canonicalize_rule", "dedupe_rules", "rule_matches",
    "DecisionTree", "TreeParams", "extract_rules", "fit",
    "XRulesError",
    "EvalReport", "MetricBundle", "classify_greedy", "confusion_and_metrics",
    "evaluate", "rule_report",
    "ExtractionConfig", "ExtractionReport", "extract_ruleset",
    "layer_limited_extract", "subsample_rows",
    "DatasetBundle", "EncoderSpec", "RawTable", "build_bundle",
    "drop_incomplete", "encode_and_normalize", "load_csv", "one_hot_labels",
    "split",
    "MlpModel", "TrainConfig", "TrainLog", "forward", "hidden_activations",
    "load_model", "loss_and_gradient", "predict", "save_model", "train",
    "__version__",
]

"""Command-line surface: preprocess, train, extract, evaluate, sweep.

Each command reads a key=value config file (see README) plus a few flag
overrides, and writes its artifacts under the configured output directory.
Every artifact embeds the config snapshot and seeds that produced it, and
all default artifacts are byte-deterministic given the same inputs and
seeds; wall-clock measurements go to separate ``*_timing.json`` sidecars
(and the timing columns of ``sweep.csv``), which are the only outputs that
vary between identical runs.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
failure (training divergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import evaluation, extraction, ingest, mlp
from .core import FeatureMatrix, Ruleset
from .dtree import TreeParams
from .errors import EmptyDatasetError, NonFiniteLossError, XRulesError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SWEEP_COLUMNS = [
    "Experiment",
    "Num. Rules",
    "Ground Truth Accuracy",
    "Model Prediction Accuracy",
    "Average Terms",
    "Longest Rule",
    "Extraction Time (s)",
    "Testing Time (s)",
    "Testing Std (s)",
]
_TIME_COLUMNS = ["Extraction Time (s)", "Testing Time (s)", "Testing Std (s)"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    data_csv: str = ""
    label_col: str = "label"
    categorical_cols: list[str] = field(default_factory=list)
    drop_cols: list[str] = field(default_factory=list)
    split_seed: int = 0
    out_dir: str = "xrules-out"
    # training
    arch: list[int] = field(default_factory=lambda: [64, 64])
    epochs_max: int = 100
    batch_size: int = 64
    patience: int = 5
    learning_rate: float = 0.001
    train_seed: int = 0
    # extraction
    max_depth: int | None = None
    max_leaves: int | None = None
    min_samples_split: int = 2
    tree_seed: int = 0
    layers: list[int] | None = None
    data_fraction: float = 1.0
    subsample_seed: int = 0
    # evaluation
    trials: int = 5
    eval_seed: int = 0
    positive_label: int = 1

    def train_config(self) -> mlp.TrainConfig:
        # patience is capped so short epochs_max overrides stay runnable
        return mlp.TrainConfig(
            epochs_max=self.epochs_max, batch_size=self.batch_size,
            patience=min(self.patience, self.epochs_max - 1),
            learning_rate=self.learning_rate,
            seed=self.train_seed,
        )

    def extraction_config(self) -> extraction.ExtractionConfig:
        return extraction.ExtractionConfig(
            tree_params=TreeParams(
                max_depth=self.max_depth, max_leaves=self.max_leaves,
                min_samples_split=self.min_samples_split, seed=self.tree_seed,
            ),
            layers=tuple(self.layers) if self.layers is not None else None,
            data_fraction=self.data_fraction,
            subsample_seed=self.subsample_seed,
        )

    def as_dict(self) -> dict:
        # out_dir is deliberately absent: it says where artifacts live, not
        # what produced them, and embedding it would break byte-identical
        # reruns into different directories.
        return {
            "data_csv": self.data_csv,
            "label_col": self.label_col,
            "categorical_cols": self.categorical_cols,
            "drop_cols": self.drop_cols,
            "split_seed": self.split_seed,
            "arch": self.arch,
            "epochs_max": self.epochs_max,
            "batch_size": self.batch_size,
            "patience": self.patience,
            "learning_rate": self.learning_rate,
            "train_seed": self.train_seed,
            "max_depth": self.max_depth,
            "max_leaves": self.max_leaves,
            "min_samples_split": self.min_samples_split,
            "tree_seed": self.tree_seed,
            "layers": self.layers,
            "data_fraction": self.data_fraction,
            "subsample_seed": self.subsample_seed,
            "trials": self.trials,
            "eval_seed": self.eval_seed,
            "positive_label": self.positive_label,
        }


_INT_KEYS = {"split_seed", "epochs_max", "batch_size", "patience", "train_seed",
             "min_samples_split", "tree_seed", "subsample_seed", "trials",
             "eval_seed", "positive_label"}
_OPT_INT_KEYS = {"max_depth", "max_leaves"}
_FLOAT_KEYS = {"learning_rate", "data_fraction"}
_STR_KEYS = {"data_csv", "label_col", "out_dir"}
_LIST_KEYS = {"categorical_cols", "drop_cols"}


def parse_config_file(path) -> RunConfig:
    """Read ``key = value`` lines; '#' starts a comment, blank lines skip."""
    cfg = RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        _apply_kv(cfg, key, value, where=f"{path}:{lineno}")
    return cfg


def _apply_kv(cfg: RunConfig, key: str, value: str, where: str) -> None:
    try:
        if key in _STR_KEYS:
            setattr(cfg, key, value)
        elif key in _INT_KEYS:
            setattr(cfg, key, int(value))
        elif key in _OPT_INT_KEYS:
            setattr(cfg, key, int(value) if value else None)
        elif key in _FLOAT_KEYS:
            setattr(cfg, key, float(value))
        elif key in _LIST_KEYS:
            setattr(cfg, key, [v.strip() for v in value.split(",") if v.strip()])
        elif key == "arch":
            cfg.arch = [int(v) for v in value.split(",") if v.strip()]
        elif key == "layers":
            cfg.layers = ([int(v) for v in value.split(",") if v.strip()]
                          if value else None)
        else:
            raise UsageError(f"{where}: unknown config key {key!r}")
    except ValueError as e:
        raise UsageError(f"{where}: bad value for {key!r}: {e}") from e


# --------------------------------------------------------------------------
# Artifact I/O helpers
# --------------------------------------------------------------------------

def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


_SPLIT_NAMES = ("train", "val", "test")


def save_bundle(bundle: ingest.DatasetBundle, out_dir: Path,
                config_snapshot: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    parts = {"train": bundle.train, "val": bundle.val, "test": bundle.test}
    for name, (X, y) in parts.items():
        np.save(out_dir / f"{name}_X.npy", X.values)
        np.save(out_dir / f"{name}_y.npy", y)
    bundle.encoder_spec.save(out_dir / "encoder.json")
    _write_json(out_dir / "bundle.json", {
        "class_count": bundle.class_count,
        "col_names": bundle.train[0].col_names,
        "sizes": {name: parts[name][0].rows for name in _SPLIT_NAMES},
        "config": config_snapshot,
    })


def load_bundle(out_dir: Path) -> ingest.DatasetBundle:
    with open(out_dir / "bundle.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    cols = meta["col_names"]
    parts = []
    for name in _SPLIT_NAMES:
        X = np.load(out_dir / f"{name}_X.npy")
        y = np.load(out_dir / f"{name}_y.npy")
        parts.append((FeatureMatrix(X, cols), y))
    spec = ingest.EncoderSpec.load(out_dir / "encoder.json")
    return ingest.DatasetBundle(parts[0], parts[1], parts[2],
                                class_count=meta["class_count"],
                                encoder_spec=spec)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_preprocess(cfg: RunConfig) -> int:
    if not cfg.data_csv:
        raise UsageError("config needs data_csv")
    table = ingest.load_csv(cfg.data_csv, cfg.label_col)
    bundle = ingest.build_bundle(table, cfg.categorical_cols, cfg.split_seed,
                                 drop_cols=cfg.drop_cols)
    save_bundle(bundle, _out(cfg) / "bundle", cfg.as_dict())
    tr, va, te = bundle.train, bundle.val, bundle.test
    print(f"preprocess: {tr[0].rows}/{va[0].rows}/{te[0].rows} "
          f"train/val/test rows, {tr[0].cols} features, "
          f"{bundle.class_count} classes -> {cfg.out_dir}/bundle")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    bundle = load_bundle(_out(cfg) / "bundle")
    k = bundle.class_count
    if k < 2:
        raise EmptyDatasetError(
            "training data contains fewer than two label classes"
        )
    train_pair = (bundle.train[0], ingest.one_hot_labels(bundle.train[1], k))
    val_pair = (bundle.val[0], ingest.one_hot_labels(bundle.val[1], k))
    model, log = mlp.train(cfg.train_config(), train_pair, val_pair, cfg.arch)
    model.meta = {"config": cfg.as_dict(), "arch": cfg.arch}
    mlp.save_model(model, _out(cfg) / "model.bin")
    _write_json(_out(cfg) / "trainlog.json",
                {"config": cfg.as_dict(), **log.as_dict()})
    print(f"train: stopped at epoch {log.stopped_epoch} "
          f"(best {log.best_epoch}), "
          f"val acc {log.val_acc[log.best_epoch]:.4f} -> {cfg.out_dir}/model.bin")
    return EXIT_OK


def cmd_extract(cfg: RunConfig) -> int:
    out = _out(cfg)
    bundle = load_bundle(out / "bundle")
    model = mlp.load_model(out / "model.bin")
    report = extraction.extract_ruleset(bundle.train[0], model,
                                        cfg.extraction_config())
    report.ruleset.save(out / "ruleset.txt", out / "ruleset.json")
    canonical = report.as_dict()
    elapsed = canonical.pop("extraction_time")
    canonical["config"] = cfg.as_dict()
    _write_json(out / "extraction_report.json", canonical)
    _write_json(out / "extraction_timing.json", {"extraction_time": elapsed})
    print(f"extract: {report.rule_count} rules "
          f"(per layer {report.per_layer_rule_counts}), "
          f"avg {report.average_terms:.1f} terms, longest {report.longest_rule}, "
          f"{elapsed:.2f}s -> {cfg.out_dir}/ruleset.txt")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    out = _out(cfg)
    bundle = load_bundle(out / "bundle")
    model = mlp.load_model(out / "model.bin")
    ruleset = Ruleset.load_json(out / "ruleset.json")
    X_test, y_true = bundle.test
    y_model = mlp.predict(model, X_test)
    report = evaluation.evaluate(ruleset, X_test, y_true, y_model,
                                 trials=cfg.trials, seed=cfg.eval_seed,
                                 positive_label=cfg.positive_label)
    canonical = report.as_dict()
    timing = {k: canonical.pop(k) for k in
              ("testing_time_mean", "testing_time_std")}
    canonical["config"] = cfg.as_dict()
    _write_json(out / "eval_report.json", canonical)
    _write_json(out / "eval_timing.json", timing)
    ruleset.save(out / "ruleset_evaluated.txt", out / "ruleset_evaluated.json")
    (out / "eval_report.txt").write_text(render_eval_report(report, ruleset),
                                         encoding="utf-8")
    print(render_eval_report(report, ruleset))
    print(f"evaluate -> {cfg.out_dir}/eval_report.json")
    return EXIT_OK


def render_eval_report(report: evaluation.EvalReport,
                       ruleset: Ruleset) -> str:
    m = report.metrics
    lines = [
        f"samples                  {report.sample_count}",
        f"trials                   {report.trials} (seed {report.seed})",
        f"model prediction accuracy {report.model_prediction_accuracy:.4f} "
        f"(std {report.model_prediction_accuracy_std:.5f})",
        f"ground truth accuracy    {report.ground_truth_accuracy:.4f} "
        f"(std {report.ground_truth_accuracy_std:.5f})",
        f"precision/recall/f1      {m.precision:.4f} / {m.recall:.4f} / {m.f1:.4f}",
        f"fpr/fnr                  {m.fpr:.4f} / {m.fnr:.4f}",
        f"matched/fallback         {report.matched_count}/{report.fallback_count}",
        f"avg rules checked        {report.avg_rules_checked:.1f} "
        f"of {len(ruleset.rules)}",
        "top rules by usage:",
    ]
    for stat in evaluation.rule_report(ruleset, "usage")[:10]:
        lines.append(f"  [{stat.index:4d}] used={stat.usage:<6d} "
                     f"acc={stat.accuracy:.3f}  {stat.text}")
    return "\n".join(lines)


def cmd_sweep(cfg: RunConfig, leaves_axis, depth_axis, layer_axis,
              fraction_axis) -> int:
    cells = []
    for n in leaves_axis:
        cells.append((f"{n} Leaves", replace(cfg, max_leaves=n)))
    for d in depth_axis:
        cells.append((f"{d} Depth", replace(cfg, max_depth=d)))
    for group in layer_axis:
        name = "Layers " + "+".join(str(i) for i in group)
        cells.append((name, replace(cfg, layers=list(group))))
    for f in fraction_axis:
        cells.append((f"{int(round(f * 100))}% Dataset",
                      replace(cfg, data_fraction=f)))
    if not cells:
        raise UsageError("sweep needs at least one non-empty axis")

    out = _out(cfg)
    bundle = load_bundle(out / "bundle")
    model = mlp.load_model(out / "model.bin")
    X_train = bundle.train[0]
    X_test, y_true = bundle.test
    y_model = mlp.predict(model, X_test)

    rows = []
    for name, cell_cfg in cells:
        try:
            rep = extraction.extract_ruleset(X_train, model,
                                             cell_cfg.extraction_config())
            er = evaluation.evaluate(rep.ruleset, X_test, y_true, y_model,
                                     trials=cfg.trials, seed=cfg.eval_seed,
                                     positive_label=cfg.positive_label)
            rows.append({
                "Experiment": name,
                "Num. Rules": rep.rule_count,
                "Ground Truth Accuracy": f"{er.ground_truth_accuracy:.4f}",
                "Model Prediction Accuracy":
                    f"{er.model_prediction_accuracy:.4f}",
                "Average Terms": f"{rep.average_terms:.1f}",
                "Longest Rule": rep.longest_rule,
                "Extraction Time (s)": f"{rep.extraction_time:.3f}",
                "Testing Time (s)": f"{er.testing_time_mean:.3f}",
                "Testing Std (s)": f"{er.testing_time_std:.3f}",
            })
            print(f"sweep: {name}: {rep.rule_count} rules, "
                  f"fidelity {er.model_prediction_accuracy:.4f}")
        except XRulesError as e:
            tag = f"ERROR:{type(e).__name__}"
            rows.append({col: (name if col == "Experiment" else tag)
                         for col in SWEEP_COLUMNS})
            print(f"sweep: {name}: {tag} ({e})", file=sys.stderr)

    _write_sweep_csv(out / "sweep.csv", rows, cfg, SWEEP_COLUMNS)
    canonical_cols = [c for c in SWEEP_COLUMNS if c not in _TIME_COLUMNS]
    _write_sweep_csv(out / "sweep_canonical.csv", rows, cfg, canonical_cols)
    print(f"sweep: {len(rows)} cells -> {cfg.out_dir}/sweep.csv")
    return EXIT_OK


def _write_sweep_csv(path: Path, rows, cfg: RunConfig, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config: {json.dumps(cfg.as_dict())}\n")
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _layer_groups(text: str) -> list[list[int]]:
    return [_int_list(group) for group in text.split(";") if group.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="xrules",
                 description="Extract and evaluate rulesets from MLP classifiers.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--out-dir", help="override out_dir")

    p = sub.add_parser("preprocess", help="CSV -> normalized dataset bundle")
    common(p)
    p.add_argument("--seed", type=int, help="override split_seed")

    p = sub.add_parser("train", help="train the MLP on the bundle")
    common(p)
    p.add_argument("--seed", type=int, help="override train_seed")
    p.add_argument("--epochs-max", type=int)

    p = sub.add_parser("extract", help="extract a ruleset from the model")
    common(p)
    p.add_argument("--max-leaves", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--layers", type=_int_list, metavar="0,1")
    p.add_argument("--data-fraction", type=float)
    p.add_argument("--seed", type=int, help="override subsample_seed")

    p = sub.add_parser("evaluate", help="evaluate the ruleset on the test split")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="override eval_seed")

    p = sub.add_parser("sweep", help="extract+evaluate over parameter axes")
    common(p)
    p.add_argument("--max-leaves", type=_int_list, default=[], metavar="10,100")
    p.add_argument("--max-depth", type=_int_list, default=[], metavar="5,10")
    p.add_argument("--layers", type=_layer_groups, default=[], metavar="0;1;0,1")
    p.add_argument("--data-fraction", type=_float_list, default=[],
                   metavar="0.2,1.0")
    p.add_argument("--trials", type=int)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = parse_config_file(args.config)
        if args.out_dir:
            cfg.out_dir = args.out_dir
        cmd = args.command
        if cmd == "preprocess":
            if args.seed is not None:
                cfg.split_seed = args.seed
            return cmd_preprocess(cfg)
        if cmd == "train":
            if args.seed is not None:
                cfg.train_seed = args.seed
            if args.epochs_max is not None:
                cfg.epochs_max = args.epochs_max
            return cmd_train(cfg)
        if cmd == "extract":
            for attr, val in (("max_leaves", args.max_leaves),
                              ("max_depth", args.max_depth),
                              ("layers", args.layers),
                              ("data_fraction", args.data_fraction),
                              ("subsample_seed", args.seed)):
                if val is not None:
                    setattr(cfg, attr, val)
            return cmd_extract(cfg)
        if cmd == "evaluate":
            if args.trials is not None:
                cfg.trials = args.trials
            if args.seed is not None:
                cfg.eval_seed = args.seed
            return cmd_evaluate(cfg)
        if cmd == "sweep":
            if args.trials is not None:
                cfg.trials = args.trials
            return cmd_sweep(cfg, args.max_leaves, args.max_depth,
                             args.layers, args.data_fraction)
        raise UsageError(f"unknown command {cmd!r}")
    except (UsageError, ValueError) as e:
        # ValueError surfaces config validation (bad fractions, widths, ...)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLossError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (XRulesError, OSError) as e:
        print(f"data error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Shared data model: terms, rules, rulesets, and feature matrices.

A term is a single threshold condition on one feature (``f3 <= 0.125`` or
``f7 > 0.5``). A rule is a conjunction of terms plus a class label; a
ruleset is an ordered list of rules with a fallback label for samples that
match nothing.

Everything here is immutable after construction except the per-rule
``usage``/``correct`` counters, which only the evaluation module writes
(single writer per evaluation run, any number of readers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyBoxError, FormatError

OP_LE = "<="
OP_GT = ">"

_OPS = (OP_LE, OP_GT)

TEXT_HEADER = "# xrules-ruleset v1"
JSON_FORMAT = "xrules-ruleset"
JSON_VERSION = 1


@dataclass(frozen=True)
class Term:
    """One threshold condition: ``feature <op> threshold``."""

    feature: int
    op: str
    threshold: float

    def __post_init__(self):
        # normalize numpy scalars so text serialization stays plain decimals
        object.__setattr__(self, "feature", int(self.feature))
        object.__setattr__(self, "threshold", float(self.threshold))
        if self.op not in _OPS:
            raise ValueError(f"op must be one of {_OPS}, got {self.op!r}")
        if self.feature < 0:
            raise ValueError(f"feature index must be >= 0, got {self.feature}")
        if not np.isfinite(self.threshold):
            raise ValueError(f"threshold must be finite, got {self.threshold}")

    def holds(self, x) -> bool:
        v = x[self.feature]
        return v <= self.threshold if self.op == OP_LE else v > self.threshold

    def __str__(self) -> str:
        return f"f{self.feature} {self.op} {self.threshold!r}"


class Rule:
    """Conjunction of terms with a class label and evaluation counters.

    Identity (equality, hashing, dedupe) is the pair (canonical terms,
    label); the counters are bookkeeping and never part of identity.
    """

    __slots__ = ("terms", "label", "usage", "correct")

    def __init__(self, terms: Sequence[Term], label: int,
                 usage: int = 0, correct: int = 0):
        self.terms = tuple(terms)
        self.label = int(label)
        self.usage = int(usage)
        self.correct = int(correct)
        if self.correct > self.usage:
            raise ValueError("correct counter cannot exceed usage counter")

    def key(self):
        return (self.terms, self.label)

    def __eq__(self, other):
        return isinstance(other, Rule) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Rule({list(self.terms)!r}, label={self.label})"

    @property
    def accuracy(self) -> float:
        """Fraction of matched samples this rule labelled correctly (0 if unused)."""
        return self.correct / self.usage if self.usage else 0.0

    def to_text(self) -> str:
        if self.terms:
            cond = " AND ".join(f"f{t.feature} {t.op} {t.threshold!r}" for t in self.terms)
        else:
            cond = "TRUE"
        return f"IF {cond} THEN class={self.label}  # usage={self.usage} correct={self.correct}"


def canonicalize_rule(terms: Iterable[Term]) -> tuple[Term, ...]:
    """Collapse repeated per-feature terms into the tightest bounds.

    Multiple ``<=`` terms on one feature intersect to the minimum threshold,
    multiple ``>`` terms to the maximum. Output is sorted by (feature, op),
    so a feature's ``<=`` bound precedes its ``>`` bound.

    Raises EmptyBoxError when some feature ends up with lower >= upper,
    i.e. no point can satisfy the conjunction.
    """
    upper: dict[int, float] = {}
    lower: dict[int, float] = {}
    for t in terms:
        if t.op == OP_LE:
            if t.feature not in upper or t.threshold < upper[t.feature]:
                upper[t.feature] = t.threshold
        else:
            if t.feature not in lower or t.threshold > lower[t.feature]:
                lower[t.feature] = t.threshold
    for f in upper.keys() & lower.keys():
        if lower[f] >= upper[f]:
            raise EmptyBoxError(
                f"feature f{f}: lower bound {lower[f]!r} >= upper bound {upper[f]!r}"
            )
    out = [Term(f, OP_LE, v) for f, v in upper.items()]
    out += [Term(f, OP_GT, v) for f, v in lower.items()]
    out.sort(key=lambda t: (t.feature, t.op))
    return tuple(out)


def rule_matches(rule: Rule, x) -> bool:
    """True iff every term holds on x; a rule with no terms matches everything."""
    return all(t.holds(x) for t in rule.terms)


def dedupe_rules(rules: Sequence[Rule]) -> list[Rule]:
    """Order-preserving removal of rules whose (terms, label) repeat an earlier rule."""
    seen = set()
    out = []
    for r in rules:
        k = r.key()
        if k not in seen:
            seen.add(k)
            out.append(r)
    return out


@dataclass
class FeatureMatrix:
    """Dense row-major feature table with column names."""

    values: np.ndarray
    col_names: list[str]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        if len(self.col_names) != self.values.shape[1]:
            raise ValueError(
                f"{len(self.col_names)} column names for {self.values.shape[1]} columns"
            )

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def matrix_values(X) -> np.ndarray:
    """Accept a FeatureMatrix or array-like; return float64 C-contiguous rows."""
    v = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"expected 2-D data, got shape {v.shape}")
    return np.ascontiguousarray(v, dtype=np.float64)


@dataclass
class PackedRules:
    """Flat-array view of a ruleset for the matching kernels.

    CSR-style layout: rule j owns terms ``offsets[j]:offsets[j+1]`` in the
    flat ``features``/``is_upper``/``thresholds`` arrays. ``is_upper`` is 1
    for ``<=`` terms and 0 for ``>`` terms.
    """

    features: np.ndarray
    is_upper: np.ndarray
    thresholds: np.ndarray
    offsets: np.ndarray
    labels: np.ndarray

    @property
    def n_rules(self) -> int:
        return len(self.labels)


@dataclass
class Ruleset:
    """Ordered rules plus fallback label for unmatched samples."""

    rules: list[Rule]
    fallback: int
    num_features: int
    provenance: dict = field(default_factory=dict)
    _packed: PackedRules | None = field(default=None, repr=False, compare=False)

    def packed(self) -> PackedRules:
        """Flat arrays for the kernels; built once, rules are fixed after construction."""
        if self._packed is None:
            n_terms = sum(len(r.terms) for r in self.rules)
            feats = np.empty(n_terms, dtype=np.int64)
            is_up = np.empty(n_terms, dtype=np.uint8)
            thr = np.empty(n_terms, dtype=np.float64)
            offs = np.empty(len(self.rules) + 1, dtype=np.int64)
            labels = np.empty(len(self.rules), dtype=np.int64)
            pos = 0
            offs[0] = 0
            for j, r in enumerate(self.rules):
                for t in r.terms:
                    feats[pos] = t.feature
                    is_up[pos] = 1 if t.op == OP_LE else 0
                    thr[pos] = t.threshold
                    pos += 1
                offs[j + 1] = pos
                labels[j] = r.label
            self._packed = PackedRules(feats, is_up, thr, offs, labels)
        return self._packed

    # --- text format -----------------------------------------------------
    # One rule per line; thresholds use repr() so parsing returns the exact
    # same float (round-trip is bit-exact).

    def to_text(self) -> str:
        lines = [
            TEXT_HEADER,
            f"# num_features={self.num_features} fallback={self.fallback}",
            f"# provenance: {json.dumps(self.provenance)}",
        ]
        lines += [r.to_text() for r in self.rules]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Ruleset":
        num_features = fallback = None
        provenance: dict = {}
        rules = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("num_features="):
                    kv = dict(part.split("=", 1) for part in body.split())
                    num_features = int(kv["num_features"])
                    fallback = int(kv["fallback"])
                elif body.startswith("provenance:"):
                    provenance = json.loads(body[len("provenance:"):])
                continue
            rules.append(_parse_rule_line(line))
        if num_features is None or fallback is None:
            raise FormatError("missing '# num_features=... fallback=...' header line")
        return cls(rules, fallback=fallback, num_features=num_features,
                   provenance=provenance)

    # --- machine-readable format -----------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "format": JSON_FORMAT,
            "version": JSON_VERSION,
            "num_features": self.num_features,
            "fallback": self.fallback,
            "provenance": self.provenance,
            "rules": [
                {
                    "terms": [[t.feature, t.op, t.threshold] for t in r.terms],
                    "label": r.label,
                    "usage": r.usage,
                    "correct": r.correct,
                }
                for r in self.rules
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Ruleset":
        if d.get("format") != JSON_FORMAT:
            raise FormatError(f"not a ruleset file (format={d.get('format')!r})")
        if d.get("version") != JSON_VERSION:
            raise FormatError(f"unsupported ruleset version {d.get('version')!r}")
        rules = [
            Rule([Term(f, op, thr) for f, op, thr in rd["terms"]],
                 rd["label"], rd["usage"], rd["correct"])
            for rd in d["rules"]
        ]
        return cls(rules, fallback=d["fallback"], num_features=d["num_features"],
                   provenance=d.get("provenance", {}))

    def save(self, txt_path, json_path) -> None:
        with open(txt_path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "Ruleset":
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise FormatError(f"corrupt ruleset file: {e}") from e
        return cls.from_json_dict(d)


def _parse_rule_line(line: str) -> Rule:
    try:
        head, comment = line.split("#", 1)
        cond_part, label_part = head.split("THEN", 1)
        if not cond_part.startswith("IF "):
            raise ValueError("rule must start with 'IF '")
        cond_part = cond_part[3:].strip()
        label = int(label_part.strip().removeprefix("class="))
        counters = dict(p.split("=", 1) for p in comment.split())
        terms = []
        if cond_part != "TRUE":
            for chunk in cond_part.split(" AND "):
                feat_s, op, thr_s = chunk.split()
                terms.append(Term(int(feat_s.removeprefix("f")), op, float(thr_s)))
        return Rule(terms, label,
                    usage=int(counters["usage"]), correct=int(counters["correct"]))
    except (ValueError, KeyError) as e:
        raise FormatError(f"unparseable rule line {line!r}: {e}") from e

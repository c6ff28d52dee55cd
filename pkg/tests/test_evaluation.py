import numpy as np
import pytest

from xrules import evaluation, mlp
from xrules.core import OP_GT, OP_LE, Rule, Ruleset, Term
from xrules.dtree import TreeParams, extract_rules, fit
from xrules.errors import DimMismatchError, LengthMismatchError
from xrules.evaluation import (
    classify_greedy,
    confusion_and_metrics,
    evaluate,
    rule_report,
)
from xrules.extraction import ExtractionConfig, extract_ruleset
from xrules.ingest import one_hot_labels
from xrules.synth import make_blobs

from helpers import comprehensive_classify


def overlapping_ruleset():
    return Ruleset(
        [Rule([Term(0, OP_LE, 0.5)], 0), Rule([Term(0, OP_LE, 0.9)], 1)],
        fallback=1, num_features=1,
    )


class TestClassifyGreedy:
    def test_first_match_wins_despite_later_match(self):
        rs = overlapping_ruleset()
        label, idx = classify_greedy(rs, np.array([0.4]))
        assert label == 0 and idx == 0  # rule 1 also matches but scans later

    def test_fallback_when_nothing_matches(self):
        rs = overlapping_ruleset()
        label, idx = classify_greedy(rs, np.array([0.95]))
        assert label == 1 and idx is None

    def test_usage_counter_increments(self):
        rs = overlapping_ruleset()
        classify_greedy(rs, np.array([0.4]))
        classify_greedy(rs, np.array([0.4]))
        classify_greedy(rs, np.array([0.7]))
        assert rs.rules[0].usage == 2 and rs.rules[1].usage == 1

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            classify_greedy(overlapping_ruleset(), np.array([0.1, 0.2]))

    @pytest.mark.parametrize("seed", range(5))
    def test_single_tree_greedy_equals_comprehensive(self, seed):
        # A single tree's rules partition the space, so greedy first-match
        # and exhaustive all-rules matching must always agree.
        rng = np.random.default_rng(seed)
        X = rng.random((300, 3))
        y = (X[:, 0] > X[:, 1]).astype(int)
        tree = fit(X, y, TreeParams(max_leaves=15))
        rs = Ruleset(extract_rules(tree), fallback=0, num_features=3)
        probe = rng.random((200, 3))
        greedy, _, _ = evaluation.classify_rows(rs, probe)
        assert np.array_equal(greedy, comprehensive_classify(rs, probe))


class TestEvaluate:
    def test_perfect_ruleset_has_unit_fidelity(self):
        rs = Ruleset(
            [Rule([Term(0, OP_LE, 0.5)], 0), Rule([Term(0, OP_GT, 0.5)], 1)],
            fallback=0, num_features=1,
        )
        X = np.array([[0.1], [0.4], [0.6], [0.9]])
        y = np.array([0, 0, 1, 1])
        report = evaluate(rs, X, y, y, trials=3, seed=0)
        assert report.model_prediction_accuracy == 1.0
        assert report.ground_truth_accuracy == 1.0
        assert report.fallback_count == 0

    def test_empty_ruleset_scores_majority_rate(self):
        rs = Ruleset([], fallback=0, num_features=1)
        X = np.zeros((10, 1))
        y = np.array([0] * 7 + [1] * 3)
        report = evaluate(rs, X, y, y, trials=2, seed=0)
        assert report.fallback_count == 10
        assert report.ground_truth_accuracy == pytest.approx(0.7)

    def test_conservation_every_trial(self):
        rng = np.random.default_rng(0)
        X = rng.random((500, 2))
        y = (X[:, 0] > 0.5).astype(int)
        tree = fit(X, y, TreeParams(max_leaves=8))
        rs = Ruleset(extract_rules(tree), fallback=0, num_features=2)
        report = evaluate(rs, X, y, y, trials=5, seed=1)
        assert sum(u for u, _ in report.rule_stats) + report.fallback_count == 500
        assert report.matched_count + report.fallback_count == 500
        for u, c in report.rule_stats:
            assert 0 <= c <= u

    def test_partition_ruleset_is_shuffle_invariant(self):
        rng = np.random.default_rng(2)
        X = rng.random((400, 3))
        y = (X[:, 1] > 0.4).astype(int)
        tree = fit(X, y, TreeParams())
        rs = Ruleset(extract_rules(tree), fallback=0, num_features=3)
        report = evaluate(rs, X, y, y, trials=5, seed=3)
        assert report.ground_truth_accuracy_std == 0.0
        assert report.model_prediction_accuracy_std == 0.0

    def test_counters_written_back_to_rules(self):
        rs = overlapping_ruleset()
        X = np.array([[0.1], [0.7], [0.95]])
        y = np.array([0, 1, 1])
        report = evaluate(rs, X, y, y, trials=1, seed=0)
        assert [(r.usage, r.correct) for r in rs.rules] == report.rule_stats

    def test_correct_against_model_flag(self):
        rs = Ruleset([Rule([], 1)], fallback=0, num_features=1)
        X = np.zeros((4, 1))
        y_true = np.array([0, 0, 0, 0])
        y_model = np.array([1, 1, 1, 0])
        vs_truth = evaluate(rs, X, y_true, y_model, trials=1, seed=0)
        assert vs_truth.rule_stats == [(4, 0)]
        vs_model = evaluate(rs, X, y_true, y_model, trials=1, seed=0,
                            correct_against="model")
        assert vs_model.rule_stats == [(4, 3)]

    def test_length_mismatch(self):
        rs = overlapping_ruleset()
        with pytest.raises(LengthMismatchError):
            evaluate(rs, np.zeros((3, 1)), np.zeros(2), np.zeros(3))

    def test_trials_validation(self):
        with pytest.raises(ValueError):
            evaluate(overlapping_ruleset(), np.zeros((1, 1)),
                     np.zeros(1), np.zeros(1), trials=0)

    def test_overlapping_rules_vary_by_order_but_average_out(self):
        # two contradictory full-space rules: accuracy flips with shuffle
        rs = Ruleset([Rule([], 0), Rule([], 1)], fallback=0, num_features=1)
        X = np.zeros((50, 1))
        y = np.zeros(50, dtype=int)
        report = evaluate(rs, X, y, y, trials=20, seed=5)
        per_trial = report.ground_truth_accuracy_per_trial
        assert set(per_trial) == {0.0, 1.0}
        assert 0.0 < report.ground_truth_accuracy < 1.0


class TestConfusion:
    def test_hand_counted_example(self):
        m = confusion_and_metrics([1, 1, 0, 0], [1, 0, 0, 1], positive=1)
        assert (m.tp, m.fp, m.tn, m.fn) == (1, 1, 1, 1)
        assert m.precision == 0.5 and m.recall == 0.5
        assert m.fpr == 0.5 and m.fnr == 0.5
        assert m.f1 == 0.5

    def test_perfect_prediction(self):
        m = confusion_and_metrics([0, 1, 1], [0, 1, 1], positive=1)
        assert m.f1 == 1.0 and m.fpr == 0.0 and m.fnr == 0.0
        assert m.accuracy == 1.0

    def test_all_negative_predictions(self):
        m = confusion_and_metrics([1, 1, 0], [0, 0, 0], positive=1)
        assert m.recall == 0.0 and m.fnr == 1.0
        assert "precision" in m.zero_division

    def test_no_positives_anywhere_flags_rates(self):
        m = confusion_and_metrics([0, 0], [0, 0], positive=1)
        assert m.recall == 0.0 and "recall" in m.zero_division
        assert "fnr" in m.zero_division

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            confusion_and_metrics([0, 1], [0], positive=1)


class TestRuleReport:
    def _evaluated_ruleset(self):
        rs = Ruleset(
            [Rule([Term(0, OP_LE, 0.3)], 0), Rule([Term(0, OP_GT, 0.3)], 1),
             Rule([Term(0, OP_GT, 2.0)], 0)],  # unreachable in [0, 1]
            fallback=0, num_features=1,
        )
        X = np.array([[0.1], [0.2], [0.5], [0.9]])
        y = np.array([0, 1, 1, 1])
        evaluate(rs, X, y, y, trials=1, seed=0)
        return rs

    def test_usage_sort(self):
        rs = self._evaluated_ruleset()
        stats = rule_report(rs, "usage")
        assert [s.usage for s in stats] == sorted(
            (s.usage for s in stats), reverse=True)
        assert stats[-1].index == 2  # unused rule last

    def test_unused_rule_has_zero_accuracy_and_sorts_last(self):
        stats = rule_report(self._evaluated_ruleset(), "accuracy")
        used_accs = [s.accuracy for s in stats if s.usage > 0]
        assert stats[-1].usage == 0 and stats[-1].accuracy == 0.0
        assert all(a >= stats[-1].accuracy for a in used_accs)

    def test_tie_breaks_by_index(self):
        rs = Ruleset([Rule([], 0), Rule([], 0)], fallback=0, num_features=1)
        stats = rule_report(rs, "usage")  # both unused: tie
        assert [s.index for s in stats] == [0, 1]

    def test_bad_sort_key(self):
        with pytest.raises(ValueError):
            rule_report(self._evaluated_ruleset(), "label")


class TestConcurrentReaders:
    def test_shared_model_and_ruleset_are_thread_safe(self):
        # inference and matching are documented as pure over shared
        # read-only objects; concurrent callers must agree with serial runs
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(8)
        X = rng.random((600, 3))
        y = (X[:, 0] > 0.5).astype(int)
        model, _ = mlp.train(
            mlp.TrainConfig(epochs_max=6, patience=2, seed=0),
            (X, one_hot_labels(y, 2)), (X[:100], one_hot_labels(y[:100], 2)),
            arch=[8],
        )
        rep = extract_ruleset(X, model, ExtractionConfig())
        rep.ruleset.packed()  # build the shared arrays up front
        serial_pred = mlp.predict(model, X)
        serial_rules, _, _ = evaluation.classify_rows(rep.ruleset, X)

        def worker(_):
            p = mlp.predict(model, X)
            r, _, _ = evaluation.classify_rows(rep.ruleset, X)
            return np.array_equal(p, serial_pred) and np.array_equal(r, serial_rules)

        with ThreadPoolExecutor(max_workers=8) as pool:
            assert all(pool.map(worker, range(16)))


class TestMeasuredStatistics:
    def test_top_usage_rule_covers_at_least_average_share(self):
        X, y = make_blobs(2000, seed=4)
        model, _ = mlp.train(
            mlp.TrainConfig(seed=0),
            (X, one_hot_labels(y, 2)), (X[:400], one_hot_labels(y[:400], 2)),
            arch=[16],
        )
        rep = extract_ruleset(X, model, ExtractionConfig())
        report = evaluate(rep.ruleset, X, y, mlp.predict(model, X),
                          trials=1, seed=0)
        usages = [u for u, _ in report.rule_stats]
        assert max(usages) >= report.matched_count / len(usages)

    def test_avg_rules_checked_bounded_by_rule_count(self):
        rs = overlapping_ruleset()
        X = np.array([[0.1], [0.7], [0.95]])
        report = evaluate(rs, X, np.zeros(3, dtype=int), np.zeros(3, dtype=int),
                          trials=3, seed=0)
        assert 0 < report.avg_rules_checked <= len(rs.rules)

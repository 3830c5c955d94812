"""Metrics against a brute-force per-sample counting oracle."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mage.errors import UsageError, ValidationError
from mage.metrics import ConfusionMatrix, confusion, metrics_from_confusion


def expand(cm_counts):
    """Turn a confusion matrix back into per-sample label lists."""
    y_true, y_pred = [], []
    k = cm_counts.shape[0]
    for t in range(k):
        for p in range(k):
            y_true += [t] * cm_counts[t, p]
            y_pred += [p] * cm_counts[t, p]
    return y_true, y_pred


def brute_force(y_true, y_pred, k):
    """Direct TP/FP/FN counting, no shared code with the implementation."""
    n = len(y_true)
    accuracy = sum(t == p for t, p in zip(y_true, y_pred)) / n
    precisions, recalls, f1s = [], [], []
    for c in range(k):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return accuracy, np.mean(precisions), np.mean(recalls), np.mean(f1s)


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        cm = confusion([0, 1, 2, 1], [0, 1, 2, 1], 3)
        np.testing.assert_array_equal(cm.counts, np.diag([1, 2, 1]))

    def test_empty_inputs_give_zero_matrix(self):
        cm = confusion([], [], 2)
        np.testing.assert_array_equal(cm.counts, 0)
        assert cm.total == 0

    def test_enumerated_case(self):
        cm = confusion([0, 0, 1, 1], [0, 1, 1, 1], 2)
        np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 2]])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            confusion([0, 3], [0, 1], 3)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            confusion([0, 1], [0], 2)


class TestMetrics:
    def test_diagonal_matrix_all_ones(self):
        m = metrics_from_confusion(ConfusionMatrix(3, np.diag([5, 3, 2])))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_hand_case(self):
        m = metrics_from_confusion(ConfusionMatrix(2, np.array([[2, 0], [1, 1]])))
        assert m.accuracy == pytest.approx(0.75)
        assert m.precision == pytest.approx(5 / 6)
        assert m.recall == pytest.approx(0.75)
        assert m.f1 == pytest.approx((0.8 + 2 / 3) / 2)
        assert m.f1 == pytest.approx(0.7333333333333334)

    def test_absent_class_contributes_zero(self):
        # class 2 never true and never predicted: P = R = F1 = 0 for it
        counts = np.array([[3, 0, 0], [0, 2, 0], [0, 0, 0]])
        m = metrics_from_confusion(ConfusionMatrix(3, counts))
        assert m.precision == pytest.approx(2 / 3)
        assert m.recall == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx(2 / 3)
        assert m.accuracy == 1.0

    def test_empty_matrix_rejected(self):
        with pytest.raises(UsageError):
            metrics_from_confusion(ConfusionMatrix(2, np.zeros((2, 2), dtype=int)))

    def test_exhaustive_k2_against_brute_force(self):
        for entries in itertools.product(range(5), repeat=4):
            counts = np.array(entries).reshape(2, 2)
            if counts.sum() == 0 or counts.sum() > 20:
                continue
            m = metrics_from_confusion(ConfusionMatrix(2, counts))
            y_true, y_pred = expand(counts)
            acc, prec, rec, f1 = brute_force(y_true, y_pred, 2)
            assert m.accuracy == pytest.approx(acc, abs=1e-12)
            assert m.precision == pytest.approx(prec, abs=1e-12)
            assert m.recall == pytest.approx(rec, abs=1e-12)
            assert m.f1 == pytest.approx(f1, abs=1e-12)

    def test_exhaustive_k3_against_brute_force(self):
        for entries in itertools.product(range(3), repeat=9):
            counts = np.array(entries).reshape(3, 3)
            if counts.sum() == 0:
                continue
            m = metrics_from_confusion(ConfusionMatrix(3, counts))
            y_true, y_pred = expand(counts)
            acc, prec, rec, f1 = brute_force(y_true, y_pred, 3)
            assert m.accuracy == pytest.approx(acc, abs=1e-12)
            assert m.precision == pytest.approx(prec, abs=1e-12)
            assert m.recall == pytest.approx(rec, abs=1e-12)
            assert m.f1 == pytest.approx(f1, abs=1e-12)

    @given(st.integers(0, 2**31), st.integers(2, 4))
    @settings(max_examples=50, deadline=None)
    def test_accuracy_invariant_under_label_permutation(self, seed, k):
        rng = np.random.default_rng(seed)
        y_true = rng.integers(0, k, 30)
        y_pred = rng.integers(0, k, 30)
        perm = rng.permutation(k)
        base = metrics_from_confusion(confusion(y_true, y_pred, k))
        mapped = metrics_from_confusion(confusion(perm[y_true], perm[y_pred], k))
        assert base.accuracy == pytest.approx(mapped.accuracy, abs=1e-12)

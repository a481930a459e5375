from __future__ import annotations

import math

import numpy as np
import pytest

from parascope.classifier import (
    CATEGORY_NAMES,
    Category,
    LabelRecord,
    TrainConfig,
    build_dataset,
    evaluate,
    format_report,
    head_gradient,
    head_loss,
    multilabel_report,
    predict,
    predict_matrix,
    sigmoid,
    split_assignments,
    train,
)
from parascope.errors import EmptyCategoryError, InvalidInputError, DimensionMismatchError


def finite_difference_gradient(w, b, X, y, l2, h=1e-5):
    """Central-difference oracle for the head loss."""
    grad_w = np.zeros_like(w)
    for i in range(len(w)):
        wp, wm = w.copy(), w.copy()
        wp[i] += h
        wm[i] -= h
        grad_w[i] = (head_loss(wp, b, X, y, l2) - head_loss(wm, b, X, y, l2)) / (2 * h)
    grad_b = (head_loss(w, b + h, X, y, l2) - head_loss(w, b - h, X, y, l2)) / (2 * h)
    return grad_w, grad_b


def relative_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / denom


def separable_rows(n, rng, dim=8, margin=0.3):
    """Linearly separable multi-label rows: label j tracks the sign of
    coordinate j, with a margin keeping every head separable."""
    rows = []
    i = 0
    while len(rows) < n:
        x = rng.normal(size=dim)
        if np.any(np.abs(x[:4]) < margin):
            continue
        labels = {Category(j) for j in range(4) if x[j] > 0}
        rows.append((f"p{i:05d}", f"synthetic {i}", x, labels))
        i += 1
    return rows


class TestSplit:
    def test_deterministic(self):
        assert split_assignments(10, 0.2, seed=42) == split_assignments(10, 0.2, seed=42)

    def test_counts(self):
        splits = split_assignments(10, 0.2, seed=1)
        assert splits.count("test") == 2
        assert splits.count("train") == 8

    def test_different_seed_differs(self):
        a = split_assignments(50, 0.2, seed=1)
        b = split_assignments(50, 0.2, seed=2)
        assert a != b

    def test_train_never_empty(self):
        assert split_assignments(1, 0.9, seed=0) == ["train"]


class TestBuildDataset:
    def test_empty_category_error_lists_all(self):
        rows = [("p1", "t", np.ones(4), {Category.DATA})]
        with pytest.raises(EmptyCategoryError) as err:
            build_dataset(rows, "hash", "m", seed=0)
        assert set(err.value.empty_categories) == {"sensing", "model", "system"}

    def test_label_vectors(self):
        rng = np.random.default_rng(0)
        rows = separable_rows(30, rng)
        ds = build_dataset(rows, "hash", "m", seed=0)
        for record, (_, _, _, labels) in zip(ds.records, rows):
            expected = [1.0 if Category(j) in labels else 0.0 for j in range(4)]
            assert record.label_vector.tolist() == expected

    def test_rerun_identical_split(self):
        rng = np.random.default_rng(1)
        rows = separable_rows(25, rng)
        a = build_dataset(rows, "hash", "m", seed=9)
        b = build_dataset(rows, "hash", "m", seed=9)
        assert [r.split for r in a.records] == [r.split for r in b.records]


class TestSigmoid:
    def test_half_at_zero(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5

    def test_saturation(self):
        assert sigmoid(np.array([50.0]))[0] >= 1 - 1e-9
        assert sigmoid(np.array([-50.0]))[0] <= 1e-9

    def test_strictly_inside_unit_interval_on_representable_range(self):
        z = np.linspace(-36, 36, 2001)
        s = sigmoid(z)
        assert np.all(s > 0)
        assert np.all(s < 1)

    def test_matches_reference(self):
        for z in (-3.7, -0.2, 0.9, 4.2):
            assert sigmoid(np.array([z]))[0] == pytest.approx(1 / (1 + math.exp(-z)), abs=1e-15)


class TestGradient:
    def test_analytic_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n, dim = rng.integers(3, 12), rng.integers(2, 10)
            X = rng.normal(size=(n, dim))
            y = rng.integers(0, 2, size=n).astype(float)
            w = rng.normal(size=dim)
            b = float(rng.normal())
            l2 = float(rng.uniform(0, 1e-2))
            gw, gb = head_gradient(w, b, X, y, l2)
            fw, fb = finite_difference_gradient(w, b, X, y, l2)
            assert relative_error(gw, fw) <= 1e-4
            assert relative_error(np.array([gb]), np.array([fb])) <= 1e-4

    def test_five_point_batch(self):
        # the operation's example scale: one head, 5 random points
        rng = np.random.default_rng(99)
        X = rng.normal(size=(5, 6))
        y = rng.integers(0, 2, size=5).astype(float)
        w = rng.normal(size=6)
        gw, gb = head_gradient(w, 0.1, X, y, 1e-4)
        fw, fb = finite_difference_gradient(w, 0.1, X, y, 1e-4)
        assert relative_error(gw, fw) <= 1e-4
        assert relative_error(np.array([gb]), np.array([fb])) <= 1e-4


class TestTrain:
    def test_zero_epochs_is_initialization(self):
        rng = np.random.default_rng(2)
        ds = build_dataset(separable_rows(40, rng), "hash", "m", seed=0)
        model = train(ds, TrainConfig(epochs=0))
        assert not model.weights.any()
        assert not model.biases.any()

    def test_loss_non_increasing(self):
        rng = np.random.default_rng(3)
        ds = build_dataset(separable_rows(60, rng), "hash", "m", seed=0)
        model = train(ds, TrainConfig(epochs=200))
        diffs = np.diff(model.loss_history)
        assert np.all(diffs <= 1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        rows = separable_rows(50, rng)
        m1 = train(build_dataset(rows, "hash", "m", seed=7), TrainConfig(epochs=100))
        m2 = train(build_dataset(rows, "hash", "m", seed=7), TrainConfig(epochs=100))
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.biases, m2.biases)

    def test_separable_train_micro_f1(self):
        rng = np.random.default_rng(5)
        ds = build_dataset(separable_rows(200, rng, dim=2 + 4, margin=0.35),
                           "hash", "m", seed=0, test_fraction=0.0)
        model = train(ds, TrainConfig(epochs=800))
        X, Y, _ = ds.train_matrix()
        _, preds = predict_matrix(model, X)
        report = multilabel_report(Y, preds)
        assert report.averages["micro"].f1 >= 0.99

    def test_degenerate_column_flagged(self):
        rng = np.random.default_rng(6)
        rows = separable_rows(30, rng)
        # force the "system" column all-one
        rows = [(pid, t, x, labels | {Category.SYSTEM}) for pid, t, x, labels in rows]
        ds = build_dataset(rows, "hash", "m", seed=0, test_fraction=0.0)
        model = train(ds, TrainConfig(epochs=10))
        assert model.degenerate_heads == [int(Category.SYSTEM)]

    def test_head_independence(self):
        # flipping labels in one category's column must leave the other
        # heads' parameters bit-identical
        rng = np.random.default_rng(8)
        rows = separable_rows(40, rng)
        flipped = [
            (
                pid,
                t,
                x,
                (labels ^ {Category.MODEL}),
            )
            for pid, t, x, labels in rows
        ]
        m1 = train(build_dataset(rows, "hash", "m", seed=0, test_fraction=0.0),
                   TrainConfig(epochs=50))
        m2 = train(build_dataset(flipped, "hash", "m", seed=0, test_fraction=0.0),
                   TrainConfig(epochs=50))
        j = int(Category.MODEL)
        for other in range(4):
            if other == j:
                assert not np.array_equal(m1.weights[other], m2.weights[other])
            else:
                assert np.array_equal(m1.weights[other], m2.weights[other])
                assert m1.biases[other] == m2.biases[other]

    def test_empty_train_split_rejected(self):
        rng = np.random.default_rng(9)
        ds = build_dataset(separable_rows(10, rng), "hash", "m", seed=0)
        ds.records = [r for r in ds.records if r.split == "test"]
        with pytest.raises(InvalidInputError):
            train(ds)


class TestPredict:
    def test_zero_model_gives_half(self):
        rng = np.random.default_rng(10)
        ds = build_dataset(separable_rows(20, rng), "hash", "m", seed=0)
        model = train(ds, TrainConfig(epochs=0))
        probs, labels = predict(model, np.ones(8))
        assert np.allclose(probs, 0.5)
        assert labels == set(Category)  # 0.5 >= default threshold

    def test_large_bias_saturates(self):
        rng = np.random.default_rng(11)
        ds = build_dataset(separable_rows(20, rng), "hash", "m", seed=0)
        model = train(ds, TrainConfig(epochs=0))
        model.biases = np.full(4, 50.0)
        probs, _ = predict(model, np.zeros(8))
        assert np.all(probs >= 1 - 1e-9)

    def test_hand_computed_probability(self):
        rng = np.random.default_rng(12)
        ds = build_dataset(separable_rows(20, rng, dim=3 + 4), "hash", "m", seed=0)
        model = train(ds, TrainConfig(epochs=0))
        w = np.array([0.2, -0.5, 1.0, 0.0, 0.0, 0.0, 0.0])
        model.weights[0] = w
        model.biases[0] = 0.3
        x = np.array([1.0, 2.0, 0.5, 0.0, 0.0, 0.0, 0.0])
        probs, _ = predict(model, x)
        z = 0.2 * 1.0 + -0.5 * 2.0 + 1.0 * 0.5 + 0.3
        assert probs[0] == pytest.approx(1 / (1 + math.exp(-z)), abs=1e-12)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(13)
        ds = build_dataset(separable_rows(50, rng), "hash", "m", seed=0)
        model = train(ds, TrainConfig(epochs=100))
        x = rng.normal(size=8)
        previous = None
        for threshold in (0.1, 0.3, 0.5, 0.7, 0.9):
            _, labels = predict(model, x, threshold)
            if previous is not None:
                assert labels <= previous
            previous = labels

    def test_dim_mismatch(self):
        rng = np.random.default_rng(14)
        ds = build_dataset(separable_rows(20, rng), "hash", "m", seed=0)
        model = train(ds, TrainConfig(epochs=0))
        with pytest.raises(DimensionMismatchError):
            predict(model, np.zeros(5))


def counting_oracle(y_true, y_pred):
    """Brute-force counting oracle, plain Python only."""
    n, k = len(y_true), len(y_true[0])
    out = {"classes": {}, "averages": {}}
    tps, fps, fns, supports = [], [], [], []
    for j in range(k):
        tp = sum(1 for i in range(n) if y_true[i][j] and y_pred[i][j])
        fp = sum(1 for i in range(n) if not y_true[i][j] and y_pred[i][j])
        fn = sum(1 for i in range(n) if y_true[i][j] and not y_pred[i][j])
        support = sum(1 for i in range(n) if y_true[i][j])
        p = float(tp) / float(tp + fp) if tp + fp else 0.0
        r = float(tp) / float(tp + fn) if tp + fn else 0.0
        f = float(2 * p * r) / float(p + r) if p + r else 0.0
        out["classes"][j] = (p, r, f, support)
        tps.append(tp); fps.append(fp); fns.append(fn); supports.append(support)
    total_tp, total_fp, total_fn = sum(tps), sum(fps), sum(fns)
    total_support = sum(supports)
    mp = float(total_tp) / float(total_tp + total_fp) if total_tp + total_fp else 0.0
    mr = float(total_tp) / float(total_tp + total_fn) if total_tp + total_fn else 0.0
    mf = float(2 * mp * mr) / float(mp + mr) if mp + mr else 0.0
    out["averages"]["micro"] = (mp, mr, mf, total_support)
    ps = [out["classes"][j][0] for j in range(k)]
    rs = [out["classes"][j][1] for j in range(k)]
    fs = [out["classes"][j][2] for j in range(k)]
    out["averages"]["macro"] = (sum(ps) / k, sum(rs) / k, sum(fs) / k, total_support)
    if total_support:
        out["averages"]["weighted"] = (
            sum(p * s for p, s in zip(ps, supports)) / total_support,
            sum(r * s for r, s in zip(rs, supports)) / total_support,
            sum(f * s for f, s in zip(fs, supports)) / total_support,
            total_support,
        )
    sp, sr, sf = [], [], []
    for i in range(n):
        inter = sum(1 for j in range(k) if y_true[i][j] and y_pred[i][j])
        npred = sum(y_pred[i])
        ntrue = sum(y_true[i])
        sp.append(float(inter) / float(npred) if npred else 0.0)
        sr.append(float(inter) / float(ntrue) if ntrue else 0.0)
        sf.append(float(2 * inter) / float(npred + ntrue) if npred + ntrue else 0.0)
    out["averages"]["samples"] = (sum(sp) / n, sum(sr) / n, sum(sf) / n, total_support)
    return out


HAND_Y_TRUE = [
    [1, 0, 0, 0],
    [1, 1, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, 1],
    [0, 0, 0, 1],
]
HAND_Y_PRED = [
    [1, 0, 0, 0],
    [1, 0, 0, 0],
    [0, 1, 1, 0],
    [0, 0, 1, 0],
    [1, 0, 0, 0],
    [0, 0, 0, 1],
]


class TestReport:
    def test_perfect_predictions_all_ones(self):
        y = np.array([[1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 0]])
        report = multilabel_report(y, y)
        for row in list(report.classes.values()) + list(report.averages.values()):
            assert row.precision == 1.0
            assert row.recall == 1.0
            assert row.f1 == 1.0

    def test_hand_counted_six_record_case(self):
        report = multilabel_report(np.array(HAND_Y_TRUE), np.array(HAND_Y_PRED))
        # hand counts: data TP=2 FP=1 FN=0 sup=2; sensing TP=1 FP=0 FN=1 sup=2;
        # model TP=1 FP=1 FN=0 sup=1; system TP=1 FP=0 FN=1 sup=2
        data = report.classes["data"]
        assert (data.precision, data.recall, data.f1, data.support) == (2 / 3, 1.0, 2 * (2 / 3) / (2 / 3 + 1.0), 2)
        sensing = report.classes["sensing"]
        assert (sensing.precision, sensing.recall, sensing.support) == (1.0, 0.5, 2)
        assert sensing.f1 == 2 * 0.5 / 1.5
        model = report.classes["model"]
        assert (model.precision, model.recall, model.support) == (0.5, 1.0, 1)
        system = report.classes["system"]
        assert (system.precision, system.recall, system.support) == (1.0, 0.5, 2)
        micro = report.averages["micro"]
        assert (micro.precision, micro.recall, micro.f1, micro.support) == (5 / 7, 5 / 7, 5 / 7, 7)
        macro = report.averages["macro"]
        assert macro.precision == (2 / 3 + 1.0 + 0.5 + 1.0) / 4
        assert macro.recall == (1.0 + 0.5 + 1.0 + 0.5) / 4
        weighted = report.averages["weighted"]
        assert weighted.precision == (2 * (2 / 3) + 2 * 1.0 + 1 * 0.5 + 2 * 1.0) / 7
        assert weighted.recall == 5 / 7
        samples = report.averages["samples"]
        assert samples.precision == (1.0 + 1.0 + 0.5 + 1.0 + 0.0 + 1.0) / 6
        assert samples.recall == (1.0 + 0.5 + 1.0 + 1.0 + 0.0 + 1.0) / 6
        assert samples.f1 == (1.0 + 2 / 3 + 2 / 3 + 1.0 + 0.0 + 1.0) / 6

    def test_matches_counting_oracle_on_random_matrices(self):
        rng = np.random.default_rng(20)
        for _ in range(25):
            n = int(rng.integers(2, 40))
            y_true = rng.integers(0, 2, size=(n, 4))
            y_pred = rng.integers(0, 2, size=(n, 4))
            report = multilabel_report(y_true, y_pred)
            oracle = counting_oracle(y_true.tolist(), y_pred.tolist())
            for j, name in enumerate(CATEGORY_NAMES):
                row = report.classes[name]
                assert (row.precision, row.recall, row.f1, row.support) == oracle["classes"][j]
            for name in ("micro", "macro", "weighted", "samples"):
                if name not in oracle["averages"]:
                    continue
                row = report.averages[name]
                assert (row.precision, row.recall, row.f1, row.support) == oracle["averages"][name]

    def test_swapping_one_bit_changes_only_affected_class(self):
        y_true = np.array(HAND_Y_TRUE)
        y_pred = np.array(HAND_Y_PRED)
        before = multilabel_report(y_true, y_pred)
        mutated = y_pred.copy()
        mutated[0][1] = 1  # spurious "sensing" prediction on record 0
        after = multilabel_report(y_true, mutated)
        for name in CATEGORY_NAMES:
            b, a = before.classes[name], after.classes[name]
            if name == "sensing":
                assert a.precision != b.precision
            else:
                assert (a.precision, a.recall, a.f1) == (b.precision, b.recall, b.f1)

    def test_zero_division_flag(self):
        y_true = np.array([[1, 0, 0, 0], [1, 0, 0, 0]])
        y_pred = np.zeros((2, 4), dtype=int)
        report = multilabel_report(y_true, y_pred)
        data = report.classes["data"]
        assert data.precision == 0.0
        assert data.zero_division
        assert report.averages["samples"].zero_division

    def test_sklearn_cross_check(self):
        sklearn_metrics = pytest.importorskip("sklearn.metrics")
        rng = np.random.default_rng(33)
        y_true = rng.integers(0, 2, size=(60, 4))
        y_pred = rng.integers(0, 2, size=(60, 4))
        report = multilabel_report(y_true, y_pred)
        for avg in ("micro", "macro", "weighted", "samples"):
            p, r, f, _ = sklearn_metrics.precision_recall_fscore_support(
                y_true, y_pred, average=avg, zero_division=0
            )
            row = report.averages[avg]
            assert row.precision == pytest.approx(p, abs=1e-12)
            assert row.recall == pytest.approx(r, abs=1e-12)
            assert row.f1 == pytest.approx(f, abs=1e-12)

    def test_evaluate_on_test_split(self):
        rng = np.random.default_rng(21)
        ds = build_dataset(separable_rows(100, rng), "hash", "m", seed=0, test_fraction=0.2)
        model = train(ds, TrainConfig(epochs=400))
        report = evaluate(model, ds)
        assert report.total_support > 0
        assert report.averages["micro"].f1 > 0.9

    def test_supports_sum_correctly(self):
        rng = np.random.default_rng(22)
        y_true = rng.integers(0, 2, size=(30, 4))
        y_pred = rng.integers(0, 2, size=(30, 4))
        report = multilabel_report(y_true, y_pred)
        class_total = sum(r.support for r in report.classes.values())
        assert report.total_support == class_total
        for row in report.averages.values():
            assert row.support == class_total


class TestFormatReport:
    def test_layout_has_all_rows(self):
        report = multilabel_report(np.array(HAND_Y_TRUE), np.array(HAND_Y_PRED))
        text = format_report(report)
        lines = text.splitlines()
        assert "precision" in lines[0] and "recall" in lines[0]
        assert "f1-score" in lines[0] and "support" in lines[0]
        for token in ("0 (data)", "1 (sensing)", "2 (model)", "3 (system)",
                      "micro avg", "macro avg", "weighted avg", "samples avg"):
            assert any(token in line for line in lines), token

    def test_values_rendered_to_two_decimals(self):
        report = multilabel_report(np.array(HAND_Y_TRUE), np.array(HAND_Y_PRED))
        text = format_report(report)
        micro_line = next(l for l in text.splitlines() if "micro avg" in l)
        assert "0.71" in micro_line  # 5/7 = 0.714...
        assert micro_line.rstrip().endswith("7")


class TestLabelRecord:
    def test_irrelevant_with_labels_rejected(self):
        record = LabelRecord("p", {Category.DATA}, irrelevant=True)
        with pytest.raises(InvalidInputError):
            record.validate()

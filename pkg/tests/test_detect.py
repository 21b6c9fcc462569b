import json

import numpy as np
import pytest

from evmforge import detect
from evmforge.detect import ClipRecord
from evmforge.errors import EmptyTestSet, SingleClass


def rec(i, label, feats, split="TRAIN"):
    feats = list(feats) + [0.0] * (7 - len(feats))
    return ClipRecord(f"c{i}", label, feats, split)


def separable(n=20, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = "FAKE" if i % 2 else "REAL"
        centre = 1.0 if label == "FAKE" else -1.0
        f = rng.normal(0, 0.2, 7)
        f[0] += centre
        out.append(ClipRecord(f"c{i}", label, f))
    return out


XOR = [rec(0, "REAL", [0, 0]), rec(1, "FAKE", [0, 1]), rec(2, "FAKE", [1, 0]), rec(3, "REAL", [1, 1])]


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(10, 7))
    y = (rng.random(10) > 0.5).astype(float)
    w, b = rng.normal(size=7), 0.3
    for l2 in (0.0, 0.1):
        _, dw, db = detect.logistic_loss_and_grad(w, b, X, y, l2)
        h = 1e-5
        num_w = np.zeros(7)
        for k in range(7):
            e = np.zeros(7)
            e[k] = h
            lp = detect.logistic_loss_and_grad(w + e, b, X, y, l2)[0]
            lm = detect.logistic_loss_and_grad(w - e, b, X, y, l2)[0]
            num_w[k] = (lp - lm) / (2 * h)
        num_b = (detect.logistic_loss_and_grad(w, b + h, X, y, l2)[0]
                 - detect.logistic_loss_and_grad(w, b - h, X, y, l2)[0]) / (2 * h)
        analytic = np.append(dw, db)
        numeric = np.append(num_w, num_b)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
        assert rel.max() < 1e-4


def test_loss_is_stable_for_large_logits():
    X = np.array([[1000.0], [-1000.0]])
    loss, dw, db = detect.logistic_loss_and_grad(np.array([1.0]), 0.0, X, np.array([0.0, 1.0]))
    assert loss == pytest.approx(1000.0)
    assert np.all(np.isfinite(dw)) and np.isfinite(db)


def test_logistic_separable():
    data = separable()
    m = detect.train_logistic(data, {"learning_rate": 0.1, "epochs": 500})
    assert detect.evaluate(m, data, split=None).accuracy == 1.0


def test_zero_epochs_is_half():
    m = detect.train_logistic(separable(), {"epochs": 0})
    label, p = detect.predict(m, np.ones(7))
    assert p == 0.5 and label == "FAKE"


def test_loss_monotone_small_lr():
    m = detect.train_logistic(separable(), {"learning_rate": 1e-3, "epochs": 200})
    assert np.all(np.diff(m.loss_history) <= 0)


def test_logistic_deterministic_and_monotone_in_feature():
    a = detect.train_logistic(separable())
    b = detect.train_logistic(separable())
    assert detect.model_to_json(a) == detect.model_to_json(b)
    assert a.weights[0] > 0
    x = np.zeros(7)
    lo = detect.predict(a, x)[1]
    x[0] = 1.0
    assert detect.predict(a, x)[1] > lo


def test_zero_variance_feature():
    data = [ClipRecord(r.clip_id, r.label, (*r.features[:6], 0.25)) for r in separable()]
    m = detect.train_logistic(data)
    assert m.norm_stds[6] == 1.0 and m.weights[6] == 0.0
    assert np.all(m.norm_stds > 0) and np.all(np.isfinite(m.weights))


def test_logistic_errors():
    with pytest.raises(SingleClass):
        detect.train_logistic([rec(0, "FAKE", [1]), rec(1, "FAKE", [2])])
    with pytest.raises(SingleClass):
        detect.train_logistic([rec(0, "FAKE", [1])])


def test_xor_tree():
    m = detect.train_tree(XOR, {"max_depth": 2})
    assert detect.evaluate(m, XOR, split=None).accuracy == 1.0
    assert m.depth() == 2
    # first split: both features tie on Gini, lowest feature index wins
    assert m.root.feature == 0 and m.root.threshold == 0.5


def test_tree_single_class_and_depth_zero():
    same = [rec(i, "FAKE", [i]) for i in range(3)]
    m = detect.train_tree(same)
    assert m.root.is_leaf and m.root.prob_fake == 1.0
    data = [rec(0, "FAKE", [0]), rec(1, "FAKE", [1]), rec(2, "REAL", [2])]
    m0 = detect.train_tree(data, {"max_depth": 0})
    assert m0.root.is_leaf and m0.root.label == "FAKE"
    assert detect.predict(m0, [99] * 7)[0] == "FAKE"


def test_tree_midpoint_threshold():
    data = [rec(0, "REAL", [1.0]), rec(1, "REAL", [2.0]), rec(2, "FAKE", [4.0])]
    m = detect.train_tree(data, {"max_depth": 1})
    assert m.root.feature == 0 and m.root.threshold == 3.0


def test_tree_min_leaf():
    data = [rec(0, "REAL", [1.0]), rec(1, "FAKE", [2.0]), rec(2, "FAKE", [3.0]), rec(3, "FAKE", [4.0])]
    m = detect.train_tree(data, {"max_depth": 3, "min_leaf": 2})
    assert m.root.left.n_samples >= 2 and m.root.right.n_samples >= 2


def test_tree_monotone_transform_invariance():
    data = separable(30, seed=4)
    transformed = [ClipRecord(r.clip_id, r.label, (np.exp(r.features[0]), *r.features[1:])) for r in data]
    a = detect.train_tree(data, {"max_depth": 3})
    b = detect.train_tree(transformed, {"max_depth": 3})
    for r, t in zip(data, transformed):
        assert detect.predict(a, r.features) == detect.predict(b, t.features)


def test_confusion_hand_count():
    # TP=3, FN=1, FP=2, TN=4
    y = [True] * 4 + [False] * 6
    p = [0.9, 0.8, 0.7, 0.1] + [0.6, 0.55] + [0.2] * 4
    m = detect.metrics_from_predictions(y, p)
    assert m.confusion == {"TP": 3, "FN": 1, "FP": 2, "TN": 4}
    assert m.precision == 0.6 and m.recall == 0.75 and m.accuracy == 0.7
    assert m.f1 == pytest.approx(2 * 0.6 * 0.75 / 1.35)


def test_metrics_extremes():
    m = detect.metrics_from_predictions([True, False], [1.0, 0.0])
    assert m.accuracy == 1.0 and m.f1 == 1.0
    assert m.cross_entropy_loss == pytest.approx(-np.log(1 - 1e-12))
    w = detect.metrics_from_predictions([True, False], [0.0, 1.0])
    assert w.accuracy == 0.0
    assert w.cross_entropy_loss == pytest.approx(-np.log(1e-12))
    with pytest.raises(EmptyTestSet):
        detect.metrics_from_predictions([], [])


def test_evaluate_empty_test():
    m = detect.train_tree(XOR)
    with pytest.raises(EmptyTestSet):
        detect.evaluate(m, XOR)


def test_oversample_counts():
    data = [rec(i, "FAKE", [i]) for i in range(4)] + [rec(9, "REAL", [9])]
    out = detect.oversample_minority(data, seed=0)
    labels = [r.label for r in out]
    assert labels.count("FAKE") == 4 and labels.count("REAL") == 4
    assert out[:5] == data


def test_oversample_balanced_and_single_class():
    data = [rec(0, "FAKE", [0]), rec(1, "REAL", [1])]
    assert detect.oversample_minority(data) == data
    with pytest.raises(SingleClass):
        detect.oversample_minority([rec(0, "FAKE", [0]), rec(1, "FAKE", [1])])


def test_oversample_test_untouched_and_seeded():
    rng = np.random.default_rng(2)
    train = [rec(i, "FAKE" if i < 16 else "REAL", rng.random(7)) for i in range(20)]
    test = [rec(100 + i, "REAL", rng.random(7), "TEST") for i in range(3)]
    a = detect.oversample_minority(train + test, seed=5)
    b = detect.oversample_minority(train + test, seed=5)
    assert a == b
    assert [r for r in a if r.split == "TEST"] == test
    distinct = {r.features for r in a if r.split == "TRAIN"}
    assert distinct == {r.features for r in train}


def test_json_round_trip():
    data = separable()
    for model in (detect.train_logistic(data), detect.train_tree(data)):
        text = detect.model_to_json(model)
        back = detect.model_from_json(text)
        for r in data:
            assert detect.predict(back, r.features)[1] == pytest.approx(
                detect.predict(model, r.features)[1], rel=1e-7)
        d = json.loads(text)
        assert d["feature_order"][0] == "mean" and d["format_version"] == 1


def test_json_rejects_bad_checksum():
    d = json.loads(detect.model_to_json(detect.train_tree(XOR)))
    d["feature_order_checksum"] = "0" * 16
    with pytest.raises(ValueError):
        detect.model_from_dict(d)


def test_record_validation():
    with pytest.raises(ValueError):
        ClipRecord("a", "MAYBE", [0] * 7)
    with pytest.raises(ValueError):
        ClipRecord("a", "FAKE", [np.nan] * 7)
    with pytest.raises(ValueError):
        ClipRecord("a", "FAKE", [0] * 7, split="VAL")

"""REAL-vs-FAKE classifiers over SSIM feature vectors.

Logistic regression (full-batch gradient descent on standardised features)
and a Gini CART tree, plus seeded minority oversampling and evaluation
metrics with FAKE as the positive class.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from evmforge.errors import EmptyTestSet, NonFiniteLoss, SingleClass
from evmforge.report import dumps
from evmforge.ssim import FEATURE_NAMES

LABELS = ("REAL", "FAKE")
SPLITS = ("TRAIN", "TEST")
MODEL_FORMAT_VERSION = 1
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    label: str
    features: tuple
    split: str = "TRAIN"

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be REAL or FAKE, got {self.label!r}")
        if self.split not in SPLITS:
            raise ValueError(f"split must be TRAIN or TEST, got {self.split!r}")
        feats = tuple(float(v) for v in self.features)
        if not all(np.isfinite(feats)):
            raise ValueError(f"{self.clip_id}: non-finite features")
        object.__setattr__(self, "features", feats)


def feature_checksum(names=FEATURE_NAMES):
    return hashlib.sha256(",".join(names).encode()).hexdigest()[:16]


def _xy(records):
    X = np.array([r.features for r in records], dtype=np.float64)
    y = np.array([r.label == "FAKE" for r in records], dtype=np.float64)
    return X, y


def _train_split(records):
    return [r for r in records if r.split == "TRAIN"]


def _require_both(records):
    labels = {r.label for r in records}
    if labels != set(LABELS):
        raise SingleClass(f"training needs both classes, have {sorted(labels)}")


def oversample_minority(records, seed=0):
    """Duplicate minority-class TRAIN records (sampling with replacement)
    until both classes have equal TRAIN counts. TEST records pass through."""
    train = _train_split(records)
    _require_both(train)
    by_label = {lab: [r for r in train if r.label == lab] for lab in LABELS}
    minority, majority = sorted(LABELS, key=lambda lab: (len(by_label[lab]), lab))
    deficit = len(by_label[majority]) - len(by_label[minority])
    if deficit == 0:
        return list(records)
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(by_label[minority]), size=deficit)
    return list(records) + [by_label[minority][i] for i in picks]


# ---------------------------------------------------------------- logistic

def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(weights, bias, X, y, l2=0.0):
    """Mean cross-entropy + ``l2 * |w|^2 / 2`` and its gradient (dw, db)."""
    z = X @ weights + bias
    # log(1 + e^z) computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * float(weights @ weights)
    r = sigmoid(z) - y
    dw = X.T @ r / len(y) + l2 * weights
    db = float(np.mean(r))
    return float(loss), dw, db


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    norm_means: np.ndarray
    norm_stds: np.ndarray
    hyper: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)

    model_type = "logistic"

    def standardize(self, X):
        return (np.asarray(X, dtype=np.float64) - self.norm_means) / self.norm_stds

    def predict_proba(self, X):
        X = np.atleast_2d(X)
        return sigmoid(self.standardize(X) @ self.weights + self.bias)

    def to_dict(self):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model_type": self.model_type,
            "feature_order": list(FEATURE_NAMES),
            "feature_order_checksum": feature_checksum(),
            "hyperparameters": dict(self.hyper),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "norm_means": self.norm_means.tolist(),
            "norm_stds": self.norm_stds.tolist(),
        }


LOGISTIC_DEFAULTS = {"learning_rate": 0.1, "epochs": 500, "l2": 0.0, "seed": 0}


def train_logistic(records, hyper=None) -> LogisticModel:
    hyper = {**LOGISTIC_DEFAULTS, **(hyper or {})}
    train = _train_split(records)
    if len(train) < 2:
        raise SingleClass("logistic training needs >= 2 TRAIN records")
    _require_both(train)
    X, y = _xy(train)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[stds == 0] = 1.0
    Z = (X - means) / stds
    w = np.zeros(X.shape[1])
    b = 0.0
    lr, l2 = float(hyper["learning_rate"]), float(hyper["l2"])
    history = []
    for _ in range(int(hyper["epochs"])):
        loss, dw, db = logistic_loss_and_grad(w, b, Z, y, l2)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"loss diverged after {len(history)} epochs")
        history.append(loss)
        w = w - lr * dw
        b = b - lr * db
    if not (np.all(np.isfinite(w)) and np.isfinite(b)):
        raise NonFiniteLoss("weights diverged")
    return LogisticModel(w, float(b), means, stds, hyper, history)


# ---------------------------------------------------------------- tree

@dataclass
class TreeNode:
    # internal nodes: feature/threshold/left/right; leaves: label/prob_fake
    feature: int | None = None
    threshold: float | None = None
    left: TreeNode | None = None
    right: TreeNode | None = None
    label: str | None = None
    prob_fake: float | None = None
    n_samples: int = 0

    @property
    def is_leaf(self):
        return self.feature is None

    def to_dict(self):
        if self.is_leaf:
            return {"leaf": True, "label": self.label, "prob_fake": self.prob_fake,
                    "n_samples": self.n_samples}
        return {"leaf": False, "feature": self.feature, "threshold": self.threshold,
                "n_samples": self.n_samples,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if d["leaf"]:
            return cls(label=d["label"], prob_fake=d["prob_fake"], n_samples=d.get("n_samples", 0))
        return cls(feature=d["feature"], threshold=d["threshold"], n_samples=d.get("n_samples", 0),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


@dataclass
class TreeModel:
    root: TreeNode
    max_depth: int
    min_leaf: int

    model_type = "tree"

    def leaf_for(self, x):
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.array([self.leaf_for(x).prob_fake for x in X])

    def depth(self):
        def _d(n):
            return 0 if n.is_leaf else 1 + max(_d(n.left), _d(n.right))
        return _d(self.root)

    def to_dict(self):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model_type": self.model_type,
            "feature_order": list(FEATURE_NAMES),
            "feature_order_checksum": feature_checksum(),
            "hyperparameters": {"max_depth": self.max_depth, "min_leaf": self.min_leaf},
            "nodes": self.root.to_dict(),
        }


TREE_DEFAULTS = {"max_depth": 4, "min_leaf": 1}


def _gini(n_fake, n):
    if n == 0:
        return 0.0
    p = n_fake / n
    return 2.0 * p * (1.0 - p)


def _leaf(y):
    n = len(y)
    p = float(np.mean(y)) if n else 0.0
    return TreeNode(label="FAKE" if p >= 0.5 else "REAL", prob_fake=p, n_samples=n)


def _best_split(X, y, min_leaf):
    """Lowest weighted Gini split; ties go to lowest feature, then threshold."""
    n = len(y)
    best = None  # (impurity, feature, threshold)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        cum_fake = np.cumsum(ys)
        total_fake = cum_fake[-1]
        for i in range(min_leaf - 1, n - min_leaf):
            if xs[i] == xs[i + 1]:
                continue
            n_left = i + 1
            left_fake = cum_fake[i]
            imp = (n_left * _gini(left_fake, n_left)
                   + (n - n_left) * _gini(total_fake - left_fake, n - n_left)) / n
            thr = 0.5 * (xs[i] + xs[i + 1])
            if best is None or imp < best[0]:
                best = (imp, j, thr)
    return best


def _grow(X, y, depth, max_depth, min_leaf):
    n_fake = float(np.sum(y))
    if depth >= max_depth or n_fake == 0 or n_fake == len(y) or len(y) < 2 * min_leaf:
        return _leaf(y)
    split = _best_split(X, y, min_leaf)
    if split is None:
        return _leaf(y)
    _, j, thr = split
    go_left = X[:, j] <= thr
    return TreeNode(
        feature=j,
        threshold=float(thr),
        n_samples=len(y),
        left=_grow(X[go_left], y[go_left], depth + 1, max_depth, min_leaf),
        right=_grow(X[~go_left], y[~go_left], depth + 1, max_depth, min_leaf),
    )


def train_tree(records, hyper=None) -> TreeModel:
    hyper = {**TREE_DEFAULTS, **(hyper or {})}
    max_depth, min_leaf = int(hyper["max_depth"]), max(1, int(hyper["min_leaf"]))
    train = _train_split(records)
    if not train:
        raise SingleClass("tree training needs >= 1 TRAIN record")
    X, y = _xy(train)
    return TreeModel(_grow(X, y, 0, max_depth, min_leaf), max_depth, min_leaf)


# ---------------------------------------------------------------- inference

def predict(model, features):
    """``(label, probability_fake)``; probability exactly 0.5 maps to FAKE."""
    p = float(model.predict_proba(np.asarray(features, dtype=np.float64))[0])
    return ("FAKE" if p >= 0.5 else "REAL"), p


@dataclass
class Metrics:
    accuracy: float
    cross_entropy_loss: float
    precision: float
    recall: float
    f1: float
    confusion: dict
    n: int

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "cross_entropy_loss": self.cross_entropy_loss,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": dict(self.confusion),
            "n": self.n,
        }


def metrics_from_predictions(y_true, prob_fake) -> Metrics:
    """Metrics for boolean FAKE truths and predicted FAKE probabilities."""
    y = np.asarray(y_true, dtype=bool)
    p = np.asarray(prob_fake, dtype=np.float64)
    if y.size == 0:
        raise EmptyTestSet("no records to evaluate")
    pred = p >= 0.5
    tp = int(np.sum(pred & y))
    tn = int(np.sum(~pred & ~y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    pc = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    loss = float(-np.mean(np.where(y, np.log(pc), np.log(1.0 - pc))))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(
        accuracy=(tp + tn) / y.size,
        cross_entropy_loss=loss,
        precision=precision,
        recall=recall,
        f1=f1,
        confusion={"TP": tp, "FN": fn, "FP": fp, "TN": tn},
        n=int(y.size),
    )


def evaluate(model, records, split="TEST") -> Metrics:
    """Metrics over ``records`` in ``split`` (all records when split is None)."""
    test = [r for r in records if split is None or r.split == split]
    if not test:
        raise EmptyTestSet(f"no {split} records to evaluate")
    X, y = _xy(test)
    return metrics_from_predictions(y.astype(bool), model.predict_proba(X))


# ---------------------------------------------------------------- serialization

def model_to_json(model) -> str:
    return dumps(model.to_dict())


def model_from_dict(d):
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {d.get('format_version')!r}")
    if d.get("feature_order_checksum") != feature_checksum():
        raise ValueError("model was trained on a different feature order")
    if d["model_type"] == "logistic":
        return LogisticModel(
            weights=np.array(d["weights"], dtype=np.float64),
            bias=float(d["bias"]),
            norm_means=np.array(d["norm_means"], dtype=np.float64),
            norm_stds=np.array(d["norm_stds"], dtype=np.float64),
            hyper=dict(d.get("hyperparameters", {})),
        )
    if d["model_type"] == "tree":
        hp = d.get("hyperparameters", {})
        return TreeModel(TreeNode.from_dict(d["nodes"]), int(hp.get("max_depth", 0)),
                         int(hp.get("min_leaf", 1)))
    raise ValueError(f"unknown model_type {d['model_type']!r}")


def model_from_json(text):
    return model_from_dict(json.loads(text))

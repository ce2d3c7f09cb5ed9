"""Downstream classifiers trained on original, subsampled or distilled data.

Every trained model exposes ``predict_proba(X) -> P(y = 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .kernel_ridge import KernelSpec, gram, krr_fit, krr_predict, median_bandwidth

KINDS = ("krr", "logreg", "knn", "cart", "forest")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "krr"
    # krr
    lam: float = 1e-6
    kernel: KernelSpec | None = None
    regress_on_ys: bool = False
    # logreg
    l2: float = 1e-3
    max_iter: int = 5000
    tol: float = 1e-6
    # knn
    k: int = 5
    # cart / forest
    max_depth: int = 8
    min_leaf: int = 1
    n_trees: int = 100
    max_features: float | None = None  # fraction of columns per split; None = sqrt(D)/D
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier {self.kind!r}; expected one of {KINDS}")
        if not self.lam > 0 or self.l2 < 0 or self.max_iter < 1 or self.k < 1:
            raise ValueError(f"invalid hyperparameters for {self.kind}")
        if self.max_depth < 0 or self.min_leaf < 1 or self.n_trees < 1:
            raise ValueError(f"invalid tree hyperparameters for {self.kind}")
        if self.max_features is not None and not 0 < self.max_features <= 1:
            raise ValueError("max_features must lie in (0, 1]")

    @classmethod
    def forest(cls, **kw) -> "ClassifierSpec":
        kw.setdefault("max_depth", 12)
        return cls("forest", **kw)


def _xy(train, spec: ClassifierSpec):
    """Features and binary labels from a Dataset or SyntheticSet."""
    if hasattr(train, "y_class"):
        X, y = train.X_s, np.asarray(train.y_class)
    else:
        X, y = train.features, np.asarray(train.labels)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if y.min() == y.max():
        raise ValueError("training set contains a single class")
    return np.asarray(X, dtype=float), y.astype(np.int64)


class _Model:
    width: int

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.width:
            raise ValueError(f"feature width {X.shape[1]} != trained width {self.width}")
        return X


class KrrClassifier(_Model):
    def __init__(self, spec, X, y, targets):
        kernel = spec.kernel or KernelSpec("rbf", median_bandwidth(X, spec.seed))
        self.model = krr_fit(X, targets, spec.lam, kernel)
        self.width = X.shape[1]

    def decision_function(self, X):
        return krr_predict(self.model, self._check(X))

    def predict_proba(self, X):
        return expit(self.decision_function(X))


class LogReg(_Model):
    """L2-regularized logistic regression by gradient descent with step 0.1/sqrt(t)."""

    def __init__(self, spec, X, y):
        n, d = X.shape
        self.width = d
        w, b = np.zeros(d), 0.0
        yf = y.astype(float)
        self.n_iter = spec.max_iter
        for t in range(1, spec.max_iter + 1):
            r = expit(X @ w + b) - yf
            gw = X.T @ r / n + spec.l2 * w
            gb = r.mean()
            if math.sqrt(gw @ gw + gb * gb) < spec.tol:
                self.n_iter = t - 1
                break
            step = 0.1 / math.sqrt(t)
            w -= step * gw
            b -= step * gb
        self.coef, self.intercept = w, b

    def predict_proba(self, X):
        return expit(self._check(X) @ self.coef + self.intercept)


class Knn(_Model):
    """Inverse-distance weighted vote over the k nearest rows; exact matches take all weight."""

    def __init__(self, spec, X, y):
        self.X, self.y = X, y.astype(float)
        self.k = min(spec.k, X.shape[0])
        self.width = X.shape[1]

    def predict_proba(self, X):
        X = self._check(X)
        d2 = ((X * X).sum(1)[:, None] + (self.X * self.X).sum(1)[None, :]
              - 2.0 * X @ self.X.T)
        d = np.sqrt(np.maximum(d2, 0.0))
        nn = np.argsort(d, axis=1, kind="stable")[:, : self.k]
        dn = np.take_along_axis(d, nn, axis=1)
        yn = self.y[nn]
        exact = dn <= 1e-12
        w = np.where(exact.any(1, keepdims=True), exact.astype(float), 1.0 / np.maximum(dn, 1e-300))
        return (w * yn).sum(1) / w.sum(1)


class Tree(_Model):
    """CART with Gini impurity; leaves store the positive fraction."""

    def __init__(self, X, y, max_depth, min_leaf, max_features=None, rng=None):
        self.width = X.shape[1]
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        n_feat = X.shape[1]
        k = n_feat if max_features is None else max(1, int(round(max_features * n_feat)))
        self._k, self._rng = k, rng
        self._min_leaf, self._max_depth = min_leaf, max_depth
        self._grow(X, y.astype(float), np.arange(X.shape[0]), 0)
        for name in ("feature", "left", "right"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        del self._rng

    def _new(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    def _best_split(self, X, y, idx):
        n = idx.size
        n_feat = X.shape[1]
        if self._k < n_feat:
            feats = np.sort(self._rng.choice(n_feat, self._k, replace=False))
        else:
            feats = range(n_feat)
        total_pos = y[idx].sum()
        best = (np.inf, -1, 0.0)
        ml = self._min_leaf
        for f in feats:
            xv = X[idx, f]
            order = np.argsort(xv, kind="stable")
            xs, ys = xv[order], y[idx][order]
            cpos = np.cumsum(ys)[:-1]
            nl = np.arange(1, n, dtype=float)
            valid = xs[1:] > xs[:-1]
            valid &= (nl >= ml) & (n - nl >= ml)
            if not valid.any():
                continue
            nr = n - nl
            pl, pr = cpos / nl, (total_pos - cpos) / nr
            imp = nl * 2 * pl * (1 - pl) + nr * 2 * pr * (1 - pr)
            imp = np.where(valid, imp, np.inf)
            j = int(np.argmin(imp))
            if imp[j] < best[0]:
                best = (imp[j], f, 0.5 * (xs[j] + xs[j + 1]))
        return best

    def _grow(self, X, y, idx, depth):
        p = y[idx].mean()
        node = self._new(p)
        if depth >= self._max_depth or p in (0.0, 1.0) or idx.size < 2 * self._min_leaf:
            return node
        imp, f, thr = self._best_split(X, y, idx)
        parent = idx.size * 2 * p * (1 - p)
        # zero-gain splits are accepted so that interactions such as XOR can be reached
        if f < 0 or imp > parent + 1e-9:
            return node
        mask = X[idx, f] <= thr
        self.feature[node], self.threshold[node] = f, thr
        self.left[node] = self._grow(X, y, idx[mask], depth + 1)
        self.right[node] = self._grow(X, y, idx[~mask], depth + 1)
        return node

    def predict_proba(self, X):
        X = self._check(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])


class Forest(_Model):
    """Bagged CART trees with per-split feature subsampling; probabilities are averaged.

    A single-tree forest is fit on the full data (no bootstrap)."""

    def __init__(self, spec, X, y):
        n, d = X.shape
        self.width = d
        frac = spec.max_features if spec.max_features is not None else math.sqrt(d) / d
        self.trees = []
        for ss in np.random.SeedSequence(spec.seed).spawn(spec.n_trees):
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, n, n) if spec.n_trees > 1 else np.arange(n)
            if y[idx].min() == y[idx].max():
                idx = np.arange(n)
            self.trees.append(Tree(X[idx], y[idx], spec.max_depth, spec.min_leaf, frac, rng))

    def predict_proba(self, X):
        X = self._check(X)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)


def train_classifier(spec: ClassifierSpec, train):
    X, y = _xy(train, spec)
    if spec.kind == "krr":
        if spec.regress_on_ys and hasattr(train, "y_s"):
            targets = np.asarray(train.y_s, dtype=float)
        else:
            targets = 2.0 * y - 1.0
        return KrrClassifier(spec, X, y, targets)
    if spec.kind == "logreg":
        return LogReg(spec, X, y)
    if spec.kind == "knn":
        return Knn(spec, X, y)
    if spec.kind == "cart":
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed).spawn(1)[0])
        return Tree(X, y, spec.max_depth, spec.min_leaf, spec.max_features, rng)
    return Forest(spec, X, y)


def predict_proba(model, X) -> np.ndarray:
    return np.asarray(model.predict_proba(X), dtype=float)

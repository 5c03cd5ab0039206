"""Random forest of CART trees, grown from scratch.

Binary classification with Gini impurity, bootstrap per tree, and a random
feature subset (ceil(sqrt(d))) at every split. Trees are flat arrays
(feature, threshold, left, right, leaf probability) so they serialize to
JSON and evaluate as vectorized index chasing. The prefix-scan split
search is the hot kernel; both acceleration paths accumulate sums in the
same order and return bit-identical trees.
"""

from __future__ import annotations

import math

import numpy as np

from . import accel


def _best_split_on_feature_loop(vals, labels, weights, min_leaf):
    """Scan sorted values for the threshold minimizing weighted child Gini.

    Returns (score, threshold); score = inf when no valid boundary exists.
    """
    n = vals.shape[0]
    cw = np.empty(n, dtype=np.float64)
    cwg = np.empty(n, dtype=np.float64)
    acc_w = 0.0
    acc_g = 0.0
    for i in range(n):
        acc_w += weights[i]
        acc_g += weights[i] * labels[i]
        cw[i] = acc_w
        cwg[i] = acc_g
    tot_w = cw[n - 1]
    tot_g = cwg[n - 1]
    best_score = np.inf
    best_thr = np.nan
    for i in range(n - 1):
        if i + 1 < min_leaf or n - i - 1 < min_leaf:
            continue
        if vals[i + 1] <= vals[i]:
            continue
        lw = cw[i]
        lg = cwg[i]
        rw = tot_w - lw
        rg = tot_g - lg
        if lw <= 0.0 or rw <= 0.0:
            continue
        pl = lg / lw
        pr = rg / rw
        gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
        gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
        score = (lw * gl + rw * gr) / tot_w
        if score < best_score:
            best_score = score
            best_thr = (vals[i] + vals[i + 1]) / 2.0
    return best_score, best_thr


_best_split_jit = accel.maybe_jit(_best_split_on_feature_loop)


def _best_split_on_feature_numpy(vals, labels, weights, min_leaf):
    n = vals.shape[0]
    if n < 2 * min_leaf:
        return np.inf, np.nan
    cw = np.cumsum(weights)
    cwg = np.cumsum(weights * labels)
    tot_w = cw[-1]
    tot_g = cwg[-1]
    i = np.arange(n - 1)
    ok = (i + 1 >= min_leaf) & (n - i - 1 >= min_leaf) & (vals[1:] > vals[:-1])
    lw = cw[:-1]
    rw = tot_w - lw
    ok &= (lw > 0.0) & (rw > 0.0)
    if not ok.any():
        return np.inf, np.nan
    with np.errstate(invalid="ignore", divide="ignore"):
        pl = cwg[:-1] / lw
        pr = (tot_g - cwg[:-1]) / rw
        gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
        gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
        score = (lw * gl + rw * gr) / tot_w
    score = np.where(ok, score, np.inf)
    best = int(np.argmin(score))
    return float(score[best]), float((vals[best] + vals[best + 1]) / 2.0)


def _best_split_on_feature(vals, labels, weights, min_leaf):
    if accel.using_numba():
        score, thr = _best_split_jit(vals, labels, weights, int(min_leaf))
        return float(score), float(thr)
    return _best_split_on_feature_numpy(vals, labels, weights, min_leaf)


class _TreeBuilder:
    def __init__(self, X, y, w, max_depth, min_leaf, mtry, rng):
        self.X = X
        self.y = y.astype(np.float64)
        self.w = w
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.prob: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.prob.append(0.0)
        return len(self.feature) - 1

    def build(self, idx: np.ndarray, depth: int) -> int:
        node = self._new_node()
        wi = self.w[idx]
        yi = self.y[idx]
        self.prob[node] = float((wi * yi).sum() / wi.sum())
        if depth >= self.max_depth or idx.size < 2 * self.min_leaf or yi.min() == yi.max():
            return node
        d = self.X.shape[1]
        feats = self.rng.choice(d, size=min(self.mtry, d), replace=False)
        best_score, best_thr, best_f = np.inf, np.nan, -1
        for f in feats:
            order = np.argsort(self.X[idx, f], kind="stable")
            sub = idx[order]
            score, thr = _best_split_on_feature(
                self.X[sub, f], self.y[sub], self.w[sub], self.min_leaf
            )
            if score < best_score:
                best_score, best_thr, best_f = score, thr, int(f)
        if best_f < 0 or not math.isfinite(best_score):
            return node
        go_left = self.X[idx, best_f] <= best_thr
        self.feature[node] = best_f
        self.threshold[node] = float(best_thr)
        self.left[node] = self.build(idx[go_left], depth + 1)
        self.right[node] = self.build(idx[~go_left], depth + 1)
        return node


def fit_tree(X, y, w, max_depth, min_leaf, mtry, seed) -> dict[str, np.ndarray]:
    """One CART tree on a bootstrap sample drawn with ``seed``."""
    rng = np.random.RandomState(seed)
    n = X.shape[0]
    boot = rng.randint(0, n, size=n)
    builder = _TreeBuilder(X[boot], y[boot], w[boot], max_depth, min_leaf, mtry, rng)
    builder.build(np.arange(n), 0)
    return {
        "feature": np.asarray(builder.feature, dtype=np.int32),
        "threshold": np.asarray(builder.threshold, dtype=np.float64),
        "left": np.asarray(builder.left, dtype=np.int32),
        "right": np.asarray(builder.right, dtype=np.int32),
        "prob": np.asarray(builder.prob, dtype=np.float64),
    }


def tree_predict(tree: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    """Leaf probability for each row (vectorized level-by-level descent)."""
    node = np.zeros(X.shape[0], dtype=np.int32)
    feature = tree["feature"]
    while True:
        f = feature[node]
        internal = f >= 0
        if not internal.any():
            return tree["prob"][node]
        rows = np.flatnonzero(internal)
        vals = X[rows, f[rows]]
        go_left = vals <= tree["threshold"][node[rows]]
        node[rows] = np.where(go_left, tree["left"][node[rows]], tree["right"][node[rows]])


def forest_predict(trees: list[dict[str, np.ndarray]], X: np.ndarray) -> np.ndarray:
    """Mean of per-tree leaf probabilities."""
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for tree in trees:
        acc += tree_predict(tree, X)
    return acc / len(trees)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 200,
    max_depth: int = 8,
    min_leaf: int = 2,
    seed: int = 0,
    class_weight: bool = False,
    mtry: int | None = None,
) -> tuple[list[dict[str, np.ndarray]], np.ndarray]:
    """Grow the forest; returns (trees, per-tree bootstrap seeds)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if n_trees < 1:
        raise ValueError("need at least one tree")
    d = X.shape[1]
    if mtry is None:
        mtry = max(1, math.ceil(math.sqrt(d)))
    w = np.ones(X.shape[0], dtype=np.float64)
    if class_weight:
        n_good = max(int(y.sum()), 1)
        n_bad = max(int((1 - y).sum()), 1)
        w = np.where(y == 1, X.shape[0] / (2.0 * n_good), X.shape[0] / (2.0 * n_bad))
    master = np.random.RandomState(seed)
    tree_seeds = master.randint(0, 2**31 - 1, size=n_trees)
    trees = [fit_tree(X, y, w, max_depth, min_leaf, mtry, int(s)) for s in tree_seeds]
    return trees, tree_seeds

"""Random forest regression on cubic polynomial features of (x, y, z).

Each tree is grown on a bootstrap sample to full depth.  At every node a
single feature is drawn uniformly from those that are not constant within
the node, and the split minimising the summed squared error of both
velocity components is taken on that feature.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

# graded-lexicographic exponent order for monomials of total degree <= 3 in (x, y, z)
MONOMIALS = tuple(
    tuple(combo.count(v) for v in range(3))
    for deg in range(4)
    for combo in combinations_with_replacement(range(3), deg)
)


def polynomial_features(x, y, z):
    """All 20 monomials x^a y^b z^c with a + b + c <= 3."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    cols = [x**a * y**b * z**c for a, b, c in MONOMIALS]
    return np.stack(cols, axis=-1)


def best_split(X, Y, feature):
    """Best threshold on one feature by summed squared error.

    Thresholds are midpoints between consecutive distinct values; samples
    with value <= threshold go left.  Returns (threshold, sse) or None if
    the feature is constant.
    """
    order = np.argsort(X[:, feature], kind="stable")
    xs = X[order, feature]
    ys = Y[order]
    n = len(xs)
    valid = np.flatnonzero(xs[1:] > xs[:-1])
    if len(valid) == 0:
        return None
    cs = np.cumsum(ys, axis=0)
    cs2 = np.cumsum(ys * ys, axis=0)
    nl = np.arange(1, n)
    sl, sl2 = cs[:-1], cs2[:-1]
    sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
    nr = n - nl
    sse = (sl2 - sl**2 / nl[:, None]).sum(axis=1) + (sr2 - sr**2 / nr[:, None]).sum(axis=1)
    i = valid[np.argmin(sse[valid])]
    return 0.5 * (xs[i] + xs[i + 1]), float(sse[i])


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]


def grow_tree(X, Y, rng):
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(Y.shape[1]))
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        Yn = Y[idx]
        value[node] = Yn.mean(axis=0)
        if len(idx) < 2 or np.all(Yn == Yn[0]):
            continue
        Xn = X[idx]
        live = np.flatnonzero(Xn.max(axis=0) > Xn.min(axis=0))
        if len(live) == 0:
            continue
        f = int(live[rng.integers(len(live))])
        thr, _ = best_split(Xn, Yn, f)
        go_left = Xn[:, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], idx[~go_left]))
        stack.append((left[node], idx[go_left]))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
    )


class ForestModel:
    def __init__(self, trees, scale):
        self.trees = trees
        self.scale = scale

    @property
    def tree_count(self):
        return len(self.trees)

    def features(self, points):
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(-1, pts.shape[-1])
        if pts.shape[1] == 2:
            pts = np.column_stack([pts, np.zeros(len(pts))])
        c, s = self.scale
        q = (pts - c) / s
        return polynomial_features(q[:, 0], q[:, 1], q[:, 2])

    def tree_predictions(self, points):
        X = self.features(points)
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, points):
        return self.tree_predictions(points).mean(axis=0)


def forest_fit(slice_, tree_count=200, rng=None, bootstrap=True):
    """Fit a forest; ``rng`` is a numpy Generator or an integer seed."""
    rng = np.random.default_rng(rng)
    pts = slice_.points
    # cubes of raw metre coordinates lose precision; use centred, scaled ones
    c = pts.mean(axis=0)
    s = np.abs(pts - c).max(axis=0)
    s[s == 0] = 1.0
    model = ForestModel([], (c, s))
    X = model.features(pts)
    Y = np.asarray(slice_.velocities, dtype=float)
    n = len(X)
    for _ in range(tree_count):
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        model.trees.append(grow_tree(X[idx], Y[idx], rng))
    return model


def forest_predict(model, x):
    return tuple(model.predict(np.asarray(x, dtype=float)[None, :])[0])


class ForestFamily:
    def __init__(self, tree_count=200, seed=0):
        self.tree_count = tree_count
        self.seed = seed

    def __call__(self, slice_):
        return forest_fit(slice_, self.tree_count, np.random.default_rng(self.seed))

"""Bootstrap regression forest of CART trees (variance-reduction splits)."""

from __future__ import annotations

import math

import numba
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_features, check_xy


@numba.njit(cache=True)
def _grow_forest(X, y, n_trees, mtry, min_leaf, max_depth, seed, bootstrap):
    n, p = X.shape
    cap = 2 * n + 1
    feat = np.full((n_trees, cap), -1, dtype=np.int64)
    thr = np.zeros((n_trees, cap))
    left = np.full((n_trees, cap), -1, dtype=np.int64)
    right = np.full((n_trees, cap), -1, dtype=np.int64)
    value = np.zeros((n_trees, cap))
    np.random.seed(seed)
    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    cand = np.arange(p)
    order = np.empty(n, dtype=np.int64)
    keys = np.empty(n)
    for t in range(n_trees):
        idx = np.empty(n, dtype=np.int64)
        for i in range(n):
            idx[i] = np.random.randint(0, n) if bootstrap else i
        n_nodes = 1
        top = 0
        stack_node[0] = 0
        stack_lo[0] = 0
        stack_hi[0] = n
        stack_depth[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack_node[top]
            lo = stack_lo[top]
            hi = stack_hi[top]
            depth = stack_depth[top]
            m = hi - lo
            s = 0.0
            ss = 0.0
            for i in range(lo, hi):
                s += y[idx[i]]
            mean = s / m
            for i in range(lo, hi):
                ss += (y[idx[i]] - mean) ** 2
            value[t, node] = mean
            if m < 2 * min_leaf or ss <= 1e-14 * (1.0 + mean * mean) * m:
                continue
            if max_depth >= 0 and depth >= max_depth:
                continue
            # partial Fisher-Yates draw of mtry candidate features
            for k in range(mtry):
                r = k + np.random.randint(0, p - k)
                tmp = cand[k]
                cand[k] = cand[r]
                cand[r] = tmp
            best_gain = 0.0
            best_f = -1
            best_t = 0.0
            for k in range(mtry):
                f = cand[k]
                for i in range(m):
                    keys[i] = X[idx[lo + i], f]
                srt = np.argsort(keys[:m], kind="mergesort")
                ls = 0.0
                for i in range(m - 1):
                    ls += y[idx[lo + srt[i]]]
                    nl = i + 1
                    if nl < min_leaf or m - nl < min_leaf:
                        continue
                    a = keys[srt[i]]
                    b = keys[srt[i + 1]]
                    if b <= a:
                        continue
                    rs = s - ls
                    # between-group sum of squares
                    gain = ls * ls / nl + rs * rs / (m - nl) - s * s / m
                    if gain > best_gain + 1e-12 * ss:
                        best_gain = gain
                        best_f = f
                        best_t = 0.5 * (a + b)
            if best_f < 0:
                continue
            # partition idx[lo:hi] in place
            nl = 0
            for i in range(lo, hi):
                if X[idx[i], best_f] <= best_t:
                    order[nl] = idx[i]
                    nl += 1
            nr = nl
            for i in range(lo, hi):
                if X[idx[i], best_f] > best_t:
                    order[nr] = idx[i]
                    nr += 1
            for i in range(m):
                idx[lo + i] = order[i]
            feat[t, node] = best_f
            thr[t, node] = best_t
            lc = n_nodes
            rc = n_nodes + 1
            n_nodes += 2
            left[t, node] = lc
            right[t, node] = rc
            stack_node[top] = lc
            stack_lo[top] = lo
            stack_hi[top] = lo + nl
            stack_depth[top] = depth + 1
            top += 1
            stack_node[top] = rc
            stack_lo[top] = lo + nl
            stack_hi[top] = hi
            stack_depth[top] = depth + 1
            top += 1
    return feat, thr, left, right, value


@numba.njit(cache=True)
def _predict_forest(X, feat, thr, left, right, value):
    n = X.shape[0]
    n_trees = feat.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            while feat[t, node] >= 0:
                if X[i, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            acc += value[t, node]
        out[i] = acc / n_trees
    return out


class RandomForest(BaseEstimator, RegressorMixin):
    """Regression forest: bootstrap rows, ``mtry`` candidate features per split.

    Parameters
    ----------
    n_trees : int
    max_depth : int or None
        ``None`` grows until leaves hit ``min_leaf``.
    min_leaf : int
        Minimum bootstrap rows per leaf.
    mtry : int or None
        Candidate features per split; ``None`` means ``ceil(p / 3)``.
    random_state : int
    bootstrap : bool
        When False every tree sees the training rows once.
    """

    def __init__(self, n_trees=1000, max_depth=None, min_leaf=5, mtry=None, random_state=0, bootstrap=True):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.random_state = random_state
        self.bootstrap = bootstrap

    def fit(self, X, y):
        X, y = check_xy(X, y)
        p = X.shape[1]
        mtry = self.mtry if self.mtry is not None else max(1, math.ceil(p / 3))
        mtry = int(min(max(mtry, 1), p))
        depth = -1 if self.max_depth is None else int(self.max_depth)
        seed = int(np.random.SeedSequence(self.random_state).generate_state(1)[0] & 0x7FFFFFFF)
        self.n_features_in_ = p
        if np.ptp(y) == 0.0:
            self.constant_ = float(y[0])
            return self
        self.constant_ = None
        trees = _grow_forest(np.ascontiguousarray(X), y, int(self.n_trees), mtry, int(self.min_leaf),
                             depth, seed, bool(self.bootstrap))
        self.trees_ = trees
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_features(X, self.n_features_in_)
        if self.constant_ is not None:
            return np.full(X.shape[0], self.constant_)
        return _predict_forest(np.ascontiguousarray(X), *self.trees_)


def fit_forest(X, y, n_trees=1000, max_depth=None, min_leaf=5, mtry=None, seed=0):
    return RandomForest(n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf, mtry=mtry,
                        random_state=seed).fit(X, y)

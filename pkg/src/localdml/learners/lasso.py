"""L1-penalized least squares by cyclic coordinate descent."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._solvers import solve_l1_quadratic
from ..core.errors import NonConvergenceWarning
from ..core.folds import FoldPartition, partition_folds
from .._validation import check_features, check_xy
from .dictionary import Dictionary


def lasso_kkt_residual(X, r, beta, lam):
    """Largest violation of the lasso optimality conditions for 0.5*mean(r**2) + lam*|beta|_1."""
    n = X.shape[0]
    grad = -(X.T @ r) / n
    active = beta != 0
    viol = np.where(active, np.abs(grad + lam * np.sign(beta)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(viol.max(initial=0.0))


@dataclass(frozen=True)
class LassoFit:
    intercept: float
    coef: np.ndarray
    n_sweeps: int
    kkt_residual: float
    penalty: float


def fit_lasso(X, y, lam, *, kkt_tol=1e-10, standardize=True):
    """Minimize ``0.5 * mean((y - b0 - X @ beta)**2) + lam * |beta|_1``.

    With ``standardize`` the objective is posed on standardized columns of
    ``X`` (mean 0, mean square 1); the returned coefficients are mapped back to
    the original scale.  The intercept is never penalized.  Constant columns
    get a zero coefficient.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("X needs at least one column")
    if lam < 0:
        raise ValueError("penalty must be nonnegative")
    n, p = X.shape
    mu = X.mean(axis=0)
    sd = X.std(axis=0) if standardize else np.ones(p)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
    Xs = (X[:, keep] - mu[keep]) / sd[keep]
    ybar = y.mean()
    yc = y - ybar
    beta, kkt, ok, sweeps = solve_l1_quadratic(Xs.T @ Xs / n, Xs.T @ yc / n, float(lam), kkt_tol=kkt_tol)
    kkt = lasso_kkt_residual(Xs, yc - Xs @ beta, beta, lam)
    if not ok:
        warnings.warn(NonConvergenceWarning(f"lasso did not converge, KKT residual {kkt:.3g}", kkt),
                      stacklevel=2)
    coef = np.zeros(p)
    coef[keep] = beta / sd[keep]
    intercept = ybar - coef @ mu
    return LassoFit(float(intercept), coef, int(sweeps), kkt, float(lam))


def default_penalty(y, n_features, c=1.1):
    """``c * sd(y) * sqrt(log(p) / n)``."""
    y = np.asarray(y, dtype=float)
    return c * float(np.std(y)) * np.sqrt(np.log(max(n_features, 2)) / y.shape[0])


def _as_partition(folds, n, seed):
    if isinstance(folds, FoldPartition):
        return folds
    return partition_folds(n, int(folds), seed)


def cross_val_lambda(X, y, grid, folds=5, seed=0):
    """Penalty from ``grid`` with the smallest K-fold validation MSE; ties go to the larger penalty."""
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("penalty grid is empty")
    if len(grid) == 1:
        return grid[0]
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    part = _as_partition(folds, X.shape[0], seed)
    best, best_mse = None, np.inf
    for lam in grid:
        sse = 0.0
        for train, test in part:
            fit = fit_lasso(X[train], y[train], lam)
            sse += float(np.sum((y[test] - fit.intercept - X[test] @ fit.coef) ** 2))
        mse = sse / X.shape[0]
        if mse < best_mse or (mse == best_mse and lam >= best):
            best, best_mse = lam, mse
    return best


class LassoRegression(BaseEstimator, RegressorMixin):
    """Coordinate-descent lasso on standardized features.

    Parameters
    ----------
    penalty : float or None
        L1 weight.  ``None`` uses ``c * sd(y) * sqrt(log(p) / n)``.
    c : float
        Constant of the default penalty.
    cv_grid : sequence of float or None
        When given, the penalty is picked by :func:`cross_val_lambda`.
    """

    def __init__(self, penalty=None, c=1.1, cv_grid=None, cv_folds=5, random_state=0, kkt_tol=1e-10):
        self.penalty = penalty
        self.c = c
        self.cv_grid = cv_grid
        self.cv_folds = cv_folds
        self.random_state = random_state
        self.kkt_tol = kkt_tol

    def fit(self, X, y):
        X, y = check_xy(X, y)
        if self.cv_grid is not None:
            lam = cross_val_lambda(X, y, self.cv_grid, self.cv_folds, self.random_state)
        elif self.penalty is None:
            lam = default_penalty(y, X.shape[1], self.c)
        else:
            lam = float(self.penalty)
        fit = fit_lasso(X, y, lam, kkt_tol=self.kkt_tol)
        self.intercept_ = fit.intercept
        self.coef_ = fit.coef
        self.penalty_ = lam
        self.n_iter_ = fit.n_sweeps
        self.kkt_residual_ = fit.kkt_residual
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_features(X, self.coef_.shape[0])
        return self.intercept_ + X @ self.coef_


class DictionaryLasso(BaseEstimator, RegressorMixin):
    """Lasso over a polynomial dictionary of the raw inputs.

    The fitted surface is dictionary-linear, ``predict(Z) = B(Z) @ coef_``,
    so it also provides the analytic ``predict_dd``.
    """

    def __init__(self, dictionary="low", penalty=None, c=1.1, cv_grid=None, random_state=0):
        self.dictionary = dictionary
        self.penalty = penalty
        self.c = c
        self.cv_grid = cv_grid
        self.random_state = random_state

    def fit(self, Z, y):
        Z, y = check_xy(Z, y)
        self.dictionary_ = Dictionary(self.dictionary).fit(Z)
        B = self.dictionary_.transform(Z)
        inner = LassoRegression(
            penalty=self.penalty, c=self.c, cv_grid=self.cv_grid, random_state=self.random_state
        ).fit(B[:, 1:], y)
        self.coef_ = np.concatenate([[inner.intercept_], inner.coef_])
        self.penalty_ = inner.penalty_
        self.kkt_residual_ = inner.kkt_residual_
        return self

    def predict(self, Z):
        check_is_fitted(self, "coef_")
        return self.dictionary_.transform(Z) @ self.coef_

    def predict_dd(self, Z):
        check_is_fitted(self, "coef_")
        return self.dictionary_.derivative_d(Z) @ self.coef_

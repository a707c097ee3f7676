"""Single-hidden-layer tanh network trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..core.errors import TrainingDivergedError
from .._validation import check_features, check_xy


def init_params(n_inputs, hidden, rng, zero_output=False):
    W1 = rng.normal(scale=1.0 / np.sqrt(max(n_inputs, 1)), size=(n_inputs, hidden))
    b1 = np.zeros(hidden)
    w2 = np.zeros(hidden) if zero_output else rng.normal(scale=1.0 / np.sqrt(hidden), size=hidden)
    return {"W1": W1, "b1": b1, "w2": w2, "b2": np.zeros(1)}


def forward(params, X):
    H = np.tanh(X @ params["W1"] + params["b1"])
    return H, H @ params["w2"] + params["b2"][0]


def loss_and_grad(params, X, y, weight_decay=0.0):
    """Mean squared error (plus ``weight_decay`` times the squared weights) and its gradient."""
    n = X.shape[0]
    H, pred = forward(params, X)
    e = pred - y
    loss = float(np.mean(e * e))
    g = 2.0 * e / n
    dH = np.outer(g, params["w2"]) * (1.0 - H * H)
    grads = {
        "W1": X.T @ dH,
        "b1": dH.sum(axis=0),
        "w2": H.T @ g,
        "b2": np.array([g.sum()]),
    }
    if weight_decay:
        loss += weight_decay * float(np.sum(params["W1"] ** 2) + np.sum(params["w2"] ** 2))
        grads["W1"] = grads["W1"] + 2.0 * weight_decay * params["W1"]
        grads["w2"] = grads["w2"] + 2.0 * weight_decay * params["w2"]
    return loss, grads


class MLPRegressor(BaseEstimator, RegressorMixin):
    """Tanh hidden layer, linear output, trained on standardized inputs and target.

    A step that raises the loss is rejected and the step size halved, so the
    accepted loss sequence never increases.
    """

    def __init__(self, hidden=8, epochs=2000, step_size=0.5, weight_decay=0.0,
                 random_state=0, zero_output_init=False):
        self.hidden = hidden
        self.epochs = epochs
        self.step_size = step_size
        self.weight_decay = weight_decay
        self.random_state = random_state
        self.zero_output_init = zero_output_init

    def fit(self, X, y):
        X, y = check_xy(X, y)
        self.n_features_in_ = X.shape[1]
        self.x_mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.x_scale_ = np.where(sd > 1e-12, sd, 1.0)
        self.y_mean_ = float(y.mean())
        y_sd = float(y.std())
        if y_sd == 0.0:
            self.y_scale_ = 1.0
            self.params_ = init_params(X.shape[1], self.hidden, np.random.default_rng(self.random_state), True)
            self.params_["w2"][:] = 0.0
            self.loss_curve_ = [0.0]
            return self
        self.y_scale_ = y_sd
        Xs = (X - self.x_mean_) / self.x_scale_
        ys = (y - self.y_mean_) / y_sd
        rng = np.random.default_rng(self.random_state)
        params = init_params(X.shape[1], self.hidden, rng, self.zero_output_init)
        loss, grads = loss_and_grad(params, Xs, ys, self.weight_decay)
        step = float(self.step_size)
        curve = [loss]
        for _ in range(int(self.epochs)):
            trial = {k: params[k] - step * grads[k] for k in params}
            new_loss, new_grads = loss_and_grad(trial, Xs, ys, self.weight_decay)
            if not np.isfinite(new_loss):
                if step < 1e-12:
                    raise TrainingDivergedError("MLP loss became non-finite")
                step *= 0.5
                continue
            if new_loss > loss:
                step *= 0.5
                if step < 1e-16:
                    break
                continue
            params, loss, grads = trial, new_loss, new_grads
            curve.append(loss)
        self.params_ = params
        self.loss_curve_ = curve
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_features(X, self.n_features_in_)
        _, pred = forward(self.params_, (X - self.x_mean_) / self.x_scale_)
        return self.y_mean_ + self.y_scale_ * pred


def fit_mlp(X, y, hidden=8, epochs=2000, step_size=0.5, seed=0):
    return MLPRegressor(hidden=hidden, epochs=epochs, step_size=step_size, random_state=seed).fit(X, y)

"""Adapters that put a regressor on dictionary features or fit one surface per arm."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from .._validation import check_xy
from .dictionary import Dictionary


class DictionaryRegressor(BaseEstimator, RegressorMixin):
    """Fit ``base`` on the non-constant dictionary features of the raw inputs."""

    def __init__(self, base, dictionary="low"):
        self.base = base
        self.dictionary = dictionary

    def fit(self, Z, y):
        Z, y = check_xy(Z, y)
        self.dictionary_ = Dictionary(self.dictionary).fit(Z)
        self.estimator_ = clone(self.base).fit(self.dictionary_.transform(Z)[:, 1:], y)
        return self

    def predict(self, Z):
        check_is_fitted(self, "estimator_")
        return self.estimator_.predict(self.dictionary_.transform(Z)[:, 1:])


class ArmwiseRegressor(BaseEstimator, RegressorMixin):
    """Separate fits for d == 0 and d != 0; ``d`` is column 0 and dropped from the inputs."""

    def __init__(self, base):
        self.base = base

    def fit(self, Z, y):
        Z, y = check_xy(Z, y)
        treated = Z[:, 0] != 0
        self.models_ = {}
        for arm, mask in ((1, treated), (0, ~treated)):
            if mask.sum() >= 2:
                self.models_[arm] = clone(self.base).fit(Z[mask][:, 1:], y[mask])
            else:
                self.models_[arm] = float(y[mask].mean()) if mask.any() else float(y.mean())
        return self

    def predict(self, Z):
        check_is_fitted(self, "models_")
        Z = np.asarray(Z, dtype=float)
        out = np.empty(Z.shape[0])
        treated = Z[:, 0] != 0
        for arm, mask in ((1, treated), (0, ~treated)):
            if not mask.any():
                continue
            model = self.models_[arm]
            out[mask] = model if isinstance(model, float) else model.predict(Z[mask][:, 1:])
        return out

"""Nuisance regression learners and the polynomial dictionary."""

from .dictionary import Dictionary, expand_dictionary
from .forest import RandomForest, fit_forest
from .lasso import (
    DictionaryLasso,
    LassoFit,
    LassoRegression,
    cross_val_lambda,
    default_penalty,
    fit_lasso,
    lasso_kkt_residual,
)
from .mlp import MLPRegressor, fit_mlp
from .wrappers import ArmwiseRegressor, DictionaryRegressor

__all__ = [
    "Dictionary", "expand_dictionary", "RandomForest", "fit_forest", "DictionaryLasso", "LassoFit",
    "LassoRegression", "cross_val_lambda", "default_penalty", "fit_lasso", "lasso_kkt_residual",
    "MLPRegressor", "fit_mlp", "ArmwiseRegressor", "DictionaryRegressor",
]

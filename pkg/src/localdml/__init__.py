"""Debiased machine learning for global and kernel-localized functionals."""

from .core import *  # noqa: F401,F403
from .core import __all__ as _core_all
from .engine import DebiasedEstimator, DmlResult, critical_value, dml_estimate, double_robustness_probe, oracle_estimate
from .riesz import (
    RieszEstimate,
    RieszLasso,
    closed_form_cate_riesz,
    closed_form_rdd_riesz,
    fit_riesz_lasso,
    localize_riesz,
    riesz_moments,
    trim,
)

__version__ = "0.1.0"

__all__ = list(_core_all) + [
    "DebiasedEstimator", "DmlResult", "critical_value", "dml_estimate", "double_robustness_probe",
    "oracle_estimate", "RieszEstimate", "RieszLasso", "closed_form_cate_riesz", "closed_form_rdd_riesz",
    "fit_riesz_lasso", "localize_riesz", "riesz_moments", "trim",
]

"""Riesz representer estimation: lasso-penalized quadratic fit, closed forms, localization, trimming."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator

from ._solvers import solve_l1_quadratic
from .core.errors import EmptyWindowError, NonConvergenceWarning, OverlapViolationError
from .core.functionals import FunctionalSpec
from .core.kernels import LocalWeighting
from .learners.dictionary import Dictionary

GLOBAL_TRIM = 50.0


def trim(value, bound):
    """Clamp to ``[-bound, bound]``."""
    if not bound > 0:
        raise ValueError("trim bound must be positive")
    return np.clip(value, -bound, bound)


def default_trim(functional: FunctionalSpec) -> float:
    if functional.is_local:
        return GLOBAL_TRIM / functional.weighting.bandwidth
    return GLOBAL_TRIM


@dataclass(frozen=True, eq=False)
class RieszEstimate:
    """A fitted or closed-form representer ``alpha(w)``, clamped at ``trim_bound``.

    ``kind`` is one of ``lasso-qp``, ``closed-form-cate``, ``closed-form-rdd``
    or ``localized`` (a base estimate times a kernel weight).
    """

    kind: str
    trim_bound: float
    functional: FunctionalSpec | None = None
    coef: np.ndarray | None = None
    dictionary: Dictionary | None = None
    propensity: Callable | None = None
    overlap: float = 0.0
    weighting: LocalWeighting | None = None
    weighting_left: LocalWeighting | None = None
    base: "RieszEstimate | None" = None
    local_column: int = 1
    kkt_residual: float = 0.0

    def raw(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if self.kind == "lasso-qp":
            return self.dictionary.transform(Z) @ self.coef
        if self.kind == "closed-form-cate":
            d = Z[:, 0]
            pi = np.asarray(self.propensity(Z), dtype=float)
            delta = self.overlap
            if np.any(pi <= delta) or np.any(pi >= 1.0 - delta):
                raise OverlapViolationError(f"propensity outside ({delta}, {1 - delta})")
            out = d / pi - (1.0 - d) / (1.0 - pi)
            if self.weighting is not None:
                out = self.weighting(Z[:, self.local_column]) * out
            return out
        if self.kind == "closed-form-rdd":
            d = Z[:, 0]
            return self.weighting(d) - self.weighting_left(d)
        if self.kind == "localized":
            return self.weighting(Z[:, self.local_column]) * self.base.predict(Z)
        raise ValueError(f"unknown representer kind {self.kind!r}")

    def predict(self, Z) -> np.ndarray:
        return trim(self.raw(Z), self.trim_bound)

    __call__ = predict


def riesz_objective(G, M, rho, lam, weights=None):
    w = np.ones_like(rho) if weights is None else weights
    return float(rho @ G @ rho - 2.0 * M @ rho + 2.0 * lam * np.sum(w * np.abs(rho)))


def riesz_kkt_residual(G, M, rho, lam, weights=None):
    w = np.ones_like(rho) if weights is None else weights
    g = G @ rho - M
    active = rho != 0
    viol = np.where(active, np.abs(g + lam * w * np.sign(rho)), np.maximum(np.abs(g) - lam * w, 0.0))
    return float(viol.max(initial=0.0))


def solve_riesz_lasso(G, M, lam, weights=None, *, kkt_tol=1e-10):
    """Minimize ``rho' G rho - 2 M' rho + 2 lam * sum(weights * |rho|)``.

    Returns ``(rho, kkt_residual, converged)``; the residual is measured on
    the gradient ``G rho - M``.  ``G`` must have a positive diagonal.
    """
    if lam < 0:
        raise ValueError("penalty must be nonnegative")
    M = np.asarray(M, dtype=float)
    pen = lam * (np.ones_like(M) if weights is None else np.asarray(weights, dtype=float))
    rho, kkt, ok, _ = solve_l1_quadratic(G, M, pen, kkt_tol=kkt_tol)
    if not ok:
        warnings.warn(NonConvergenceWarning(f"Riesz lasso did not converge, KKT residual {kkt:.3g}", kkt),
                      stacklevel=2)
    return rho, kkt, ok


class _BasisMatrix:
    """Predictor whose output is the whole dictionary matrix."""

    def __init__(self, dictionary):
        self.dictionary = dictionary

    def predict(self, Z):
        return self.dictionary.transform(Z)

    def predict_dd(self, Z):
        return self.dictionary.derivative_d(Z)


def basis_moments_matrix(dictionary: Dictionary, spec: FunctionalSpec, Z) -> np.ndarray:
    """``m(W_i, b_j)`` for every row ``i`` and basis function ``j``."""
    return spec.m(Z, _BasisMatrix(dictionary))


def riesz_moments(dictionary: Dictionary, spec: FunctionalSpec, Z) -> np.ndarray:
    """Sample means ``M_j = E_n[m(W, b_j)]``."""
    return basis_moments_matrix(dictionary, spec, Z).mean(axis=0)


def fit_riesz_lasso(dictionary: Dictionary, spec: FunctionalSpec, Z, penalty, *, trim_bound=None,
                    jitter=1e-10, normalize=False):
    """Lasso-penalized quadratic representer over ``dictionary``.

    Solves ``min rho' G rho - 2 M' rho + 2 penalty |rho|_1`` with
    ``G = E_n[b b']`` (plus ``jitter`` on the diagonal) and ``M`` from
    :func:`riesz_moments`.  With ``normalize`` each coordinate's penalty is
    scaled by the root mean square of its basis function, which is the same
    as penalizing coefficients of unit-scale features.
    """
    Z = np.asarray(Z, dtype=float)
    B = dictionary.transform(Z)
    n = B.shape[0]
    G = B.T @ B / n
    G[np.diag_indices_from(G)] += jitter
    M = riesz_moments(dictionary, spec, Z)
    if normalize:
        # weighted l1 on rho == plain l1 on s * rho, with s the basis RMS
        s = np.sqrt(np.diag(G))
        rho_s, kkt, _ = solve_riesz_lasso(G / np.outer(s, s), M / s, penalty)
        rho = rho_s / s
    else:
        rho, kkt, _ = solve_riesz_lasso(G, M, penalty)
    if trim_bound is None:
        trim_bound = default_trim(spec)
    return RieszEstimate(kind="lasso-qp", trim_bound=float(trim_bound), functional=spec, coef=rho,
                         dictionary=dictionary, kkt_residual=kkt)


def closed_form_cate_riesz(propensity, weighting: LocalWeighting | None = None, *, overlap=0.01,
                           trim_bound=np.inf, local_column=1):
    """``l_h(v) * (d / pi(w) - (1 - d) / (1 - pi(w)))``; without a weighting, the ATE representer.

    ``propensity`` maps a feature matrix to treatment probabilities.
    """
    return RieszEstimate(kind="closed-form-cate", trim_bound=trim_bound, propensity=propensity,
                         overlap=overlap, weighting=weighting, local_column=local_column)


def closed_form_rdd_riesz(weighting_right: LocalWeighting, weighting_left: LocalWeighting,
                          *, trim_bound=np.inf):
    """``l+_h(d) - l-_h(d)``."""
    for w in (weighting_right, weighting_left):
        if not w.omega > 0:
            raise EmptyWindowError(w.point, w.bandwidth)
    return RieszEstimate(kind="closed-form-rdd", trim_bound=trim_bound, weighting=weighting_right,
                         weighting_left=weighting_left, local_column=0)


def localize_riesz(global_estimate: RieszEstimate, weighting: LocalWeighting, *, trim_bound=None,
                   local_column=1):
    """Multiply a global representer by the localization weight, then trim.

    The default trim bound is ``50 / h``.
    """
    if trim_bound is None:
        trim_bound = GLOBAL_TRIM / weighting.bandwidth
    return RieszEstimate(kind="localized", trim_bound=float(trim_bound), weighting=weighting,
                         base=global_estimate, local_column=local_column,
                         functional=None if global_estimate.functional is None else global_estimate.functional)


class RieszLasso(BaseEstimator):
    """Sklearn-style wrapper around :func:`fit_riesz_lasso`.

    Parameters
    ----------
    dictionary : {"low", "high"}
    penalty : float or None
        ``None`` picks ``c * sqrt(log(p) / n)``.
    c : float or None
        Constant of the default penalty; ``None`` means ``0.5 * max_j |M_j|``.
    strategy : {"localize", "direct"}
        For CATE-type targets, ``"localize"`` fits the global representer and
        multiplies it by the kernel weight; ``"direct"`` fits on the localized
        functional.  RDD targets are always fit directly.
    trim : float or None
        Trim bound; ``None`` gives 50 (global) or ``50 / h`` (local).
    normalize : bool
        Penalize coefficients on the unit-RMS scale of each basis function.
    """

    def __init__(self, dictionary="low", penalty=None, c=None, strategy="localize", trim=None,
                 normalize=True, jitter=1e-10):
        self.dictionary = dictionary
        self.penalty = penalty
        self.c = c
        self.strategy = strategy
        self.trim = trim
        self.normalize = normalize
        self.jitter = jitter

    def _penalty(self, dictionary, spec, Z):
        if self.penalty is not None:
            return float(self.penalty)
        n = Z.shape[0]
        p = dictionary.n_features
        c = self.c
        if c is None:
            M = riesz_moments(dictionary, spec, Z)
            if self.normalize:
                B = dictionary.transform(Z)
                M = M / np.sqrt(np.maximum(np.mean(B * B, axis=0), self.jitter))
            c = 0.5 * float(np.max(np.abs(M)))
        return c * np.sqrt(np.log(max(p, 2)) / n)

    def fit(self, Z, functional: FunctionalSpec):
        if self.strategy not in ("localize", "direct"):
            raise ValueError(f"strategy must be 'localize' or 'direct', got {self.strategy!r}")
        Z = np.asarray(Z, dtype=float)
        dictionary = Dictionary(self.dictionary).fit(Z)
        localize = self.strategy == "localize" and functional.is_local and functional.kind != "rdd"
        target = functional.global_version() if localize else functional
        if target.is_local:
            windows = [target.weighting] + ([target.weighting_left] if target.kind == "rdd" else [])
            for w in windows:
                if not np.any(w(Z[:, target.local_column]) != 0):
                    raise EmptyWindowError(w.point, w.bandwidth)
        lam = self._penalty(dictionary, target, Z)
        global_trim = GLOBAL_TRIM if localize else self.trim
        est = fit_riesz_lasso(dictionary, target, Z, lam, trim_bound=global_trim, jitter=self.jitter,
                              normalize=self.normalize)
        self.penalty_ = lam
        self.target_ = target
        self.global_estimate_ = est if not target.is_local else None
        self.estimate_ = self.for_functional(functional) if localize else est
        return self

    def for_functional(self, functional: FunctionalSpec) -> RieszEstimate:
        """The representer for ``functional``.

        A representer fit on a global target is reused for any localization
        of it (kernel weight times the global fit); otherwise ``functional``
        must be the one it was fit for.
        """
        if functional == self.target_:
            return self.estimate_ if self.global_estimate_ is None else self.global_estimate_
        if (self.global_estimate_ is not None and functional.is_local and functional.kind != "rdd"
                and functional.global_version() == self.target_):
            est = localize_riesz(self.global_estimate_, functional.weighting, trim_bound=self.trim,
                                 local_column=functional.local_column)
            return replace(est, functional=functional)
        raise ValueError(f"representer was fit for {self.target_.kind}, not for {functional.kind}")

    def predict(self, Z):
        return self.estimate_.predict(Z)

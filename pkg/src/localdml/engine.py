"""Cross-fitted debiased estimate, standard error and confidence interval."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator, clone

from .core.data import Dataset
from .core.errors import FoldFitError
from .core.folds import FoldPartition, partition_folds
from .core.functionals import FunctionalSpec, FunctionPredictor
from .riesz import RieszEstimate, RieszLasso

logger = logging.getLogger(__name__)


def critical_value(a: float) -> float:
    """The ``1 - a/2`` quantile of the standard Gaussian."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"level a must lie in (0, 1), got {a!r}")
    return float(norm.ppf(1.0 - a / 2.0))


def _fingerprint(index, obj) -> str:
    h = hashlib.sha1(np.ascontiguousarray(index, dtype=np.int64).tobytes())
    h.update(repr(obj).encode())
    return h.hexdigest()[:12]


@dataclass(frozen=True)
class FoldRecord:
    fold: int
    n_train: int
    n_test: int
    gamma_fingerprint: str
    alpha_fingerprint: str
    mean_m: float
    mean_correction: float
    fold_mean: float


@dataclass(frozen=True, eq=False)
class DmlResult:
    """Point estimate, standard error and interval from one cross-fitted run.

    ``psi`` holds the per-observation moments with ``theta`` subtracted, so
    ``psi.mean() == 0`` and ``sigma**2 == mean(psi**2)``.
    """

    theta: float
    sigma: float
    n: int
    level: float
    critical: float
    psi: np.ndarray
    m_part: np.ndarray
    correction: np.ndarray
    folds: tuple = ()
    kind: str = ""
    point: float | None = None
    config: dict = field(default_factory=dict)
    alpha: np.ndarray | None = None

    @property
    def se(self) -> float:
        return self.sigma / np.sqrt(self.n)

    @property
    def half_width(self) -> float:
        return self.critical * self.sigma * self.n ** -0.5

    @property
    def ci(self) -> tuple[float, float]:
        hw = self.half_width
        return (self.theta - hw, self.theta + hw)

    def covers(self, value: float) -> bool:
        lo, hi = self.ci
        return bool(lo <= value <= hi)

    def interval(self, level: float) -> tuple[float, float]:
        hw = critical_value(level) * self.sigma * self.n ** -0.5
        return (self.theta - hw, self.theta + hw)

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {
            "theta": self.theta,
            "sigma": self.sigma,
            "se": self.se,
            "n": self.n,
            "level": self.level,
            "critical_value": self.critical,
            "ci_lower": lo,
            "ci_upper": hi,
            "kind": self.kind,
            "point": self.point,
            "folds": [fr.__dict__ for fr in self.folds],
            "config": self.config,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    CSV_FIELDS = ("kind", "point", "n", "theta", "sigma", "se", "level", "ci_lower", "ci_upper")

    def csv_row(self) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in self.CSV_FIELDS}


def _fit_gamma(regressor, Z, y):
    if hasattr(regressor, "fit"):
        return clone(regressor).fit(Z, y)
    return regressor


def _fit_alpha(riesz, Z, functional):
    if isinstance(riesz, RieszEstimate) or not hasattr(riesz, "fit"):
        return riesz
    return clone(riesz).fit(Z, functional)


def _alpha_for(fitted, functional):
    if isinstance(fitted, RieszLasso):
        return fitted.for_functional(functional)
    if callable(fitted) and not hasattr(fitted, "predict"):
        # factory building a fixed representer per functional (oracle runs)
        return fitted(functional)
    return fitted


@dataclass
class CrossFit:
    """Nuisances fitted on each fold complement, reusable across localizations."""

    folds: FoldPartition
    gammas: list
    alphas: list
    riesz_target: FunctionalSpec | None = None


def crossfit_nuisances(Z, y, folds: FoldPartition, regressor, riesz, functional: FunctionalSpec,
                       n_jobs=1) -> CrossFit:
    """Fit ``gamma`` and ``alpha`` on every fold complement."""

    def one(k):
        train = folds.train_index(k)
        try:
            g = _fit_gamma(regressor, Z[train], y[train])
            a = _fit_alpha(riesz, Z[train], functional)
        except Exception as exc:  # noqa: BLE001 - re-raised with the fold attached
            raise FoldFitError(k, exc) from exc
        return g, a

    if n_jobs == 1:
        fits = [one(k) for k in range(folds.n_folds)]
    else:
        from joblib import Parallel, delayed

        fits = Parallel(n_jobs=n_jobs)(delayed(one)(k) for k in range(folds.n_folds))
    return CrossFit(folds=folds, gammas=[f[0] for f in fits], alphas=[f[1] for f in fits],
                    riesz_target=functional)


def refit_riesz(Z, crossfit: CrossFit, riesz, functional: FunctionalSpec) -> CrossFit:
    """Keep the fitted regressions and refit the representer for ``functional``."""
    alphas = []
    for k in range(crossfit.folds.n_folds):
        try:
            alphas.append(_fit_alpha(riesz, Z[crossfit.folds.train_index(k)], functional))
        except Exception as exc:  # noqa: BLE001
            raise FoldFitError(k, exc) from exc
    return CrossFit(folds=crossfit.folds, gammas=crossfit.gammas, alphas=alphas, riesz_target=functional)


def assemble(Z, y, crossfit: CrossFit, functional: FunctionalSpec, level=0.05, config=None) -> DmlResult:
    """Held-out moments, estimate, standard error and interval from fitted nuisances."""
    n = Z.shape[0]
    m_part = np.empty(n)
    correction = np.empty(n)
    alpha_values = np.empty(n)
    records = []
    for k in range(crossfit.folds.n_folds):
        test = crossfit.folds.test_index(k)
        g = crossfit.gammas[k]
        a = _alpha_for(crossfit.alphas[k], functional)
        Zt = Z[test]
        try:
            mk = functional.m(Zt, g)
            ak = np.asarray(a.predict(Zt), dtype=float)
            ck = ak * (y[test] - np.asarray(g.predict(Zt)))
        except Exception as exc:  # noqa: BLE001
            raise FoldFitError(k, exc) from exc
        m_part[test] = mk
        correction[test] = ck
        alpha_values[test] = ak
        train = crossfit.folds.train_index(k)
        records.append(FoldRecord(
            fold=k, n_train=int(train.size), n_test=int(test.size),
            gamma_fingerprint=_fingerprint(train, g), alpha_fingerprint=_fingerprint(train, a),
            mean_m=float(mk.mean()), mean_correction=float(ck.mean()), fold_mean=float((mk + ck).mean()),
        ))
    total = m_part + correction
    # exactly rounded sums: the estimate does not depend on row order
    theta = math.fsum(total) / n
    psi = total - theta
    sigma = math.sqrt(math.fsum(psi * psi) / n)
    return DmlResult(
        theta=theta, sigma=sigma, n=n, level=level, critical=critical_value(level), psi=psi,
        m_part=m_part, correction=correction, folds=tuple(records), kind=functional.kind,
        point=functional.point, config=dict(config or {}), alpha=alpha_values,
    )


class DebiasedEstimator(BaseEstimator):
    """Debiased machine learning with cross-fitting.

    Parameters
    ----------
    functional : FunctionalSpec
    regressor : estimator or predictor
        Anything with ``fit``/``predict`` is cloned and refit on each fold
        complement; an object with only ``predict`` is used as-is (oracle).
    riesz : RieszLasso, RieszEstimate or predictor
        Representer learner, or a fixed representer.
    n_folds : int
    level : float
        The interval has coverage ``1 - level``.
    random_state : int
        Seeds the fold shuffle.
    """

    def __init__(self, functional, regressor, riesz, n_folds=5, level=0.05, random_state=0, n_jobs=1):
        self.functional = functional
        self.regressor = regressor
        self.riesz = riesz
        self.n_folds = n_folds
        self.level = level
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, data: Dataset, folds: FoldPartition | None = None):
        Z = data.features()
        y = data.y
        if folds is None:
            folds = partition_folds(data.n, self.n_folds, self.random_state)
        self.crossfit_ = crossfit_nuisances(Z, y, folds, self.regressor, self.riesz, self.functional,
                                            self.n_jobs)
        self._Z, self._y = Z, y
        self.result_ = assemble(Z, y, self.crossfit_, self.functional, self.level)
        self.theta_ = self.result_.theta
        self.se_ = self.result_.se
        self.ci_ = self.result_.ci
        return self

    def evaluate(self, functional: FunctionalSpec) -> DmlResult:
        """Re-assemble the estimate for another localization of the same global target.

        Valid when ``gamma`` does not depend on the localization and the
        representer was fit with ``strategy="localize"`` (or is fixed).
        """
        return assemble(self._Z, self._y, self.crossfit_, functional, self.level)


def dml_estimate(data: Dataset, functional: FunctionalSpec, regressor, riesz, n_folds=5, level=0.05,
                 seed=0, n_jobs=1) -> DmlResult:
    est = DebiasedEstimator(functional, regressor, riesz, n_folds=n_folds, level=level,
                            random_state=seed, n_jobs=n_jobs)
    return est.fit(data).result_


def oracle_estimate(data: Dataset, functional: FunctionalSpec, gamma0, alpha0, level=0.05, n_folds=5,
                    seed=0) -> DmlResult:
    """Same assembly with the true nuisances injected; nothing is fit."""
    return dml_estimate(data, functional, gamma0, alpha0, n_folds=n_folds, level=level, seed=seed)


def double_robustness_probe(data: Dataset, functional: FunctionalSpec, gamma0, alpha0, *,
                            wrong_gamma=None, wrong_alpha=None, perturbation=None, scale=0.5,
                            level=0.05, n_folds=5, seed=0):
    """Two runs: (true gamma, wrong alpha) and (wrong gamma, true alpha).

    Wrong nuisances default to the truth plus ``scale * perturbation(Z)``
    where ``perturbation`` defaults to the localization covariate ``v``
    (a dictionary basis function).
    """
    if perturbation is None:
        perturbation = lambda Z: Z[:, 1]  # noqa: E731
    if wrong_gamma is None:
        wrong_gamma = FunctionPredictor(lambda Z: gamma0.predict(Z) + scale * perturbation(Z), name="gamma0+pert")
    if wrong_alpha is None:
        wrong_alpha = FunctionPredictor(lambda Z: alpha0.predict(Z) + scale * perturbation(Z), name="alpha0+pert")
    kw = dict(level=level, n_folds=n_folds, seed=seed)
    return (
        oracle_estimate(data, functional, gamma0, wrong_alpha, **kw),
        oracle_estimate(data, functional, wrong_gamma, alpha0, **kw),
    )

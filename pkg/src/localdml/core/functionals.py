"""Target functionals ``m(w, f)`` and the doubly robust moment."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import UnsupportedFunctionalError
from .kernels import LocalWeighting

KINDS = ("ate", "cate", "rdd", "avg_deriv", "het_deriv")
LOCAL_KINDS = ("cate", "rdd", "het_deriv")
DERIVATIVE_KINDS = ("avg_deriv", "het_deriv")

# mean-square-continuity exponent per kind
CONTINUITY_EXPONENT = {"ate": 1.0, "cate": 1.0, "rdd": 1.0, "avg_deriv": 0.5, "het_deriv": 0.5}

_GLOBAL_OF = {"cate": "ate", "het_deriv": "avg_deriv"}


def _with_column(Z, col, value):
    Z = np.array(Z, dtype=float, copy=True)
    Z[:, col] = value
    return Z


@dataclass(frozen=True)
class FunctionalSpec:
    """A linear functional of the regression, evaluated row by row on a feature matrix.

    Feature-matrix layout follows :meth:`Dataset.features`: column 0 is the
    treatment / running variable ``d`` and column 1 the localization
    covariate ``v`` when the data carry one.

    ``weighting`` localizes in ``v`` (``cate``, ``het_deriv``) or, for
    ``rdd``, is the right-hand window in ``d`` with ``weighting_left`` the
    left-hand one.
    """

    kind: str
    weighting: LocalWeighting | None = None
    weighting_left: LocalWeighting | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"functional kind must be one of {KINDS}, got {self.kind!r}")
        if self.is_local and self.weighting is None:
            raise ValueError(f"{self.kind} functional needs a LocalWeighting")
        if not self.is_local and (self.weighting is not None or self.weighting_left is not None):
            raise ValueError(f"global functional {self.kind} takes no weighting")
        if self.kind == "rdd":
            if self.weighting_left is None:
                raise ValueError("rdd functional needs weighting_left")
            if self.weighting.side != "right" or self.weighting_left.side != "left":
                raise ValueError("rdd weightings must be one-sided: right and left")

    @property
    def is_local(self) -> bool:
        return self.kind in LOCAL_KINDS

    @property
    def q(self) -> float:
        return CONTINUITY_EXPONENT[self.kind]

    @property
    def point(self):
        return None if self.weighting is None else self.weighting.point

    @property
    def local_column(self) -> int | None:
        if self.kind == "rdd":
            return 0
        return 1 if self.is_local else None

    def global_version(self) -> "FunctionalSpec":
        """The unlocalized functional whose representer gets localized."""
        if self.kind not in _GLOBAL_OF:
            if self.is_local:
                raise UnsupportedFunctionalError(f"{self.kind} has no global counterpart")
            return self
        return FunctionalSpec(kind=_GLOBAL_OF[self.kind])

    def with_weighting(self, weighting: LocalWeighting) -> "FunctionalSpec":
        return replace(self, weighting=weighting)

    def localization(self, Z) -> np.ndarray:
        """``l_h`` at each row; ones for global kinds."""
        Z = np.asarray(Z, dtype=float)
        if not self.is_local:
            return np.ones(Z.shape[0])
        if self.kind == "rdd":
            raise UnsupportedFunctionalError("rdd carries two one-sided windows, not one localization")
        return self.weighting(Z[:, self.local_column])

    def m(self, Z, f) -> np.ndarray:
        """m(W_i, f) for every row of ``Z``; ``f`` needs ``predict`` (and ``predict_dd``).

        A predictor returning an ``(n, k)`` matrix gives ``m`` for each of its
        ``k`` columns.
        """
        Z = np.asarray(Z, dtype=float)
        kind = self.kind
        if kind in ("ate", "cate"):
            out = np.asarray(f.predict(_with_column(Z, 0, 1.0))) - np.asarray(f.predict(_with_column(Z, 0, 0.0)))
        elif kind in DERIVATIVE_KINDS:
            dd = getattr(f, "predict_dd", None)
            if dd is None:
                raise UnsupportedFunctionalError(
                    f"{kind} needs an analytic d-derivative; {type(f).__name__} has none"
                )
            out = np.asarray(dd(Z))
        else:  # rdd
            d = Z[:, 0]
            return _scale_rows(self.weighting(d) - self.weighting_left(d), np.asarray(f.predict(Z)))
        if self.is_local:
            out = _scale_rows(self.localization(Z), out)
        return np.asarray(out, dtype=float)


def _scale_rows(w, out):
    # predictors may return a matrix (one column per basis function)
    return w[:, None] * out if out.ndim == 2 else w * out


def eval_functional_m(spec: FunctionalSpec, Z, f) -> np.ndarray:
    return spec.m(Z, f)


@dataclass(frozen=True, eq=False)
class MomentValue:
    """Row-wise pieces of ``psi = m + alpha * (y - gamma) - theta``."""

    m_part: np.ndarray
    correction: np.ndarray
    theta: float

    @property
    def combined(self) -> np.ndarray:
        return self.m_part + self.correction - self.theta


def moment_psi(Z, y, theta, gamma, alpha, spec: FunctionalSpec) -> MomentValue:
    """Doubly robust moment at each row; ``gamma`` and ``alpha`` expose ``predict``."""
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    m_part = spec.m(Z, gamma)
    correction = np.asarray(alpha.predict(Z)) * (y - np.asarray(gamma.predict(Z)))
    return MomentValue(m_part=m_part, correction=correction, theta=float(theta))


class FunctionPredictor:
    """Wrap plain callables as a predictor (oracles, closed-form truths).

    ``fn(Z)`` returns predictions; ``dd(Z)`` the analytic d-derivative.
    """

    def __init__(self, fn, dd=None, name=None):
        self.fn = fn
        self.dd = dd
        self.name = name or getattr(fn, "__name__", "function")
        if dd is not None:
            self.predict_dd = lambda Z: np.asarray(dd(np.asarray(Z, dtype=float)), dtype=float)

    def predict(self, Z):
        Z = np.asarray(Z, dtype=float)
        return np.broadcast_to(np.asarray(self.fn(Z), dtype=float), (Z.shape[0],)).copy()

    def __repr__(self):
        return f"FunctionPredictor({self.name})"


def constant_predictor(c: float) -> FunctionPredictor:
    return FunctionPredictor(lambda Z: np.full(Z.shape[0], float(c)),
                             dd=lambda Z: np.zeros(Z.shape[0]), name=f"const({c})")

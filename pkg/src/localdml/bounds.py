"""Finite-sample error bounds for debiased estimates and the rate checks behind them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .core.errors import UndefinedScaleError
from .core.functionals import FunctionalSpec, eval_functional_m
from .core.kernels import Kernel, LocalWeighting

BERRY_ESSEEN_CONSTANT = 0.4748


@dataclass(frozen=True)
class BoundInputs:
    """Constants, rates and moments entering the bound calculators.

    ``R_*`` are mean-square errors of the fitted nuisances and ``P_*`` their
    projected counterparts (equal to ``R_*`` for plain regressions). ``sigma``,
    ``kappa`` and ``zeta`` are the second, third and fourth moment norms of the
    oracle score. ``theta_error`` is the estimation error entering the
    variance bound; ``h``, ``v_order`` and ``approx_constant`` feed the
    localization bias term.
    """

    Q_bar: float = 1.0
    q: float = 1.0
    sigma_bar: float = 1.0
    alpha_bar: float = 1.0
    alpha_trim: float = 1.0
    eps: float = 0.1
    eps_prime: float = 0.1
    L: int = 5
    n: int = 100
    R_gamma: float = 0.0
    R_alpha: float = 0.0
    P_gamma: float | None = None
    P_alpha: float | None = None
    sigma: float = 1.0
    kappa: float = 1.0
    zeta: float = 1.0
    theta_error: float = 0.0
    h: float | None = None
    v_order: float | None = None
    approx_constant: float | None = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite")
            if f.name != "theta_error" and value < 0:
                raise ValueError(f"{f.name} must be nonnegative")
        if not 0 < self.eps < 1 or not 0 < self.eps_prime < 1:
            raise ValueError("eps and eps_prime must lie in (0, 1)")
        if not 0 < self.q <= 1:
            raise ValueError("q must lie in (0, 1]")
        if self.L < 1 or self.n < 1:
            raise ValueError("L and n must be at least 1")

    @property
    def P_gamma_or_R(self) -> float:
        return self.R_gamma if self.P_gamma is None else self.P_gamma

    @property
    def P_alpha_or_R(self) -> float:
        return self.R_alpha if self.P_alpha is None else self.P_alpha

    def replace(self, **changes) -> "BoundInputs":
        d = asdict(self)
        d.update(changes)
        return BoundInputs(**d)

    def as_dict(self) -> dict:
        return asdict(self)


def _require_scale(sigma: float):
    if not sigma > 0:
        raise UndefinedScaleError(f"the score scale sigma must be positive, got {sigma}")


def delta_basic(b: BoundInputs) -> float:
    """Gaussian-approximation remainder without a trimming bound on the fitted representer."""
    _require_scale(b.sigma)
    lead = 3.0 * b.L / (b.eps * b.sigma)
    bracket = ((math.sqrt(b.Q_bar) + b.alpha_bar) * b.R_gamma ** (b.q / 2)
               + b.sigma_bar * math.sqrt(b.R_alpha)
               + math.sqrt(b.n * b.R_gamma * b.R_alpha))
    return lead * bracket


def _product_term(b: BoundInputs) -> float:
    return min(math.sqrt(b.n * b.P_gamma_or_R * b.R_alpha), math.sqrt(b.n * b.R_gamma * b.P_alpha_or_R))


def delta_refined(b: BoundInputs) -> float:
    """Remainder when the fitted representer is bounded by ``alpha_trim``; uses projected errors."""
    _require_scale(b.sigma)
    lead = 4.0 * b.L / (math.sqrt(b.eps) * b.sigma)
    bracket = ((math.sqrt(b.Q_bar) + b.alpha_bar + b.alpha_trim) * b.R_gamma ** (b.q / 2)
               + b.sigma_bar * math.sqrt(b.R_alpha))
    return lead * bracket + _product_term(b) / b.sigma


def berry_esseen_term(kappa: float, sigma: float, n: float) -> float:
    _require_scale(sigma)
    if n < 1:
        raise ValueError("n must be at least 1")
    return BERRY_ESSEEN_CONSTANT * (kappa / sigma) ** 3 / math.sqrt(n)


@dataclass(frozen=True)
class VarianceBound:
    delta_prime: float
    delta_double_prime: float
    total: float


def variance_bound(b: BoundInputs) -> VarianceBound:
    """High-probability bound on the error of the plug-in variance estimate."""
    dp = (4.0 * b.theta_error ** 2
          + 24.0 * b.L / b.eps_prime * ((b.Q_bar + b.alpha_trim ** 2) * b.R_gamma ** b.q
                                        + b.sigma_bar ** 2 * b.R_alpha))
    dpp = math.sqrt(2.0 / b.eps_prime) * b.zeta ** 2 / math.sqrt(b.n)
    total = dp + 2.0 * math.sqrt(dp) * (math.sqrt(dpp) + b.sigma) + dpp
    return VarianceBound(dp, dpp, total)


def approximation_error(C: float, h: float, v_order: float, n: float, sigma_h: float) -> float:
    """Bias of the localized target relative to its limit, in standard-error units."""
    if not (C > 0 and h > 0):
        raise ValueError("C and h must be positive")
    if v_order < 1:
        raise ValueError("v_order must be at least 1")
    _require_scale(sigma_h)
    return math.sqrt(n) * C * h ** v_order / sigma_h


@dataclass(frozen=True)
class ChecklistReport:
    """Trajectories over the supplied sample sizes; a flag is true when its trajectory never rises."""

    n: list
    moment_ratio: list
    condition_1: list
    condition_2: list
    condition_3: list
    flags: dict

    def as_dict(self) -> dict:
        return asdict(self)


def _non_increasing(values) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def corollary_checklist(sequence: Sequence[BoundInputs]) -> ChecklistReport:
    """Evaluate the rate conditions for coverage along a sequence of growing ``n``."""
    seq = list(sequence)
    if not seq:
        raise ValueError("need at least one BoundInputs")
    if any(b.n <= a.n for a, b in zip(seq, seq[1:])):
        raise ValueError("the sequence must be indexed by strictly increasing n")
    for b in seq:
        _require_scale(b.sigma)
    moment = [((b.kappa / b.sigma) ** 3 + b.zeta ** 2) / math.sqrt(b.n) for b in seq]
    c1 = [(math.sqrt(b.Q_bar) + b.alpha_bar / b.sigma + b.alpha_trim) * b.R_gamma ** (b.q / 2) for b in seq]
    c2 = [b.sigma_bar * math.sqrt(b.R_alpha) for b in seq]
    c3 = [min(math.sqrt(b.n * b.R_gamma * b.R_alpha), _product_term(b)) / b.sigma for b in seq]
    traj = {"moment_ratio": moment, "condition_1": c1, "condition_2": c2, "condition_3": c3}
    return ChecklistReport(n=[b.n for b in seq], flags={k: _non_increasing(v) for k, v in traj.items()}, **traj)


@dataclass(frozen=True)
class EmpiricalRates:
    R_gamma: float
    R_alpha: float
    per_fold_gamma: list
    per_fold_alpha: list


def empirical_rates(gammas, alphas, gamma0, alpha0, Z_eval) -> EmpiricalRates:
    """Mean-square errors of fitted nuisances against known truths on a fresh sample."""
    Z_eval = np.asarray(Z_eval, dtype=float)
    g0 = np.asarray(gamma0.predict(Z_eval) if hasattr(gamma0, "predict") else gamma0(Z_eval), dtype=float)
    a0 = np.asarray(alpha0(Z_eval), dtype=float)
    rg = [float(np.mean((np.asarray(g.predict(Z_eval)) - g0) ** 2)) for g in gammas]
    ra = [float(np.mean((np.asarray(a(Z_eval)) - a0) ** 2)) for a in alphas]
    return EmpiricalRates(float(np.mean(rg)) if rg else 0.0, float(np.mean(ra)) if ra else 0.0, rg, ra)


@dataclass(frozen=True)
class ScalingProbe:
    bandwidths: list
    sigmas: list
    slope: float


def oracle_score_sd(data, functional: FunctionalSpec, gamma0, alpha0) -> float:
    """Standard deviation of the oracle score over ``data``."""
    Z, y = data.features(), data.y
    m = eval_functional_m(functional, Z, gamma0)
    psi = m + np.asarray(alpha0(Z)) * (y - gamma0.predict(Z))
    return float(np.std(psi))


def sigma_h_scaling_probe(bandwidths, data, gamma0, alpha_for: Callable[[FunctionalSpec], Callable], *,
                          point: float | None = 0.0, kernel: Kernel | None = None) -> ScalingProbe:
    """Slope of log oracle-score sd against log bandwidth.

    ``alpha_for`` maps a functional to its true representer. With
    ``point=None`` the global functional is used at every bandwidth.
    """
    hs = [float(h) for h in bandwidths]
    if len(hs) < 4:
        raise ValueError("need at least four bandwidths")
    kernel = kernel or Kernel("epanechnikov")
    sigmas = []
    for h in hs:
        if point is None:
            spec = FunctionalSpec("ate")
        else:
            spec = FunctionalSpec("cate", LocalWeighting.from_sample(data.v, kernel, point, h))
        sigmas.append(oracle_score_sd(data, spec, gamma0, alpha_for(spec)))
    slope = float(np.polyfit(np.log(hs), np.log(sigmas), 1)[0])
    return ScalingProbe(hs, sigmas, slope)


def bound_report(b: BoundInputs, sigma_h: float | None = None) -> dict:
    """Every calculator that the supplied inputs allow, as a flat dictionary."""
    out = {"inputs": b.as_dict(),
           "delta_basic": delta_basic(b),
           "delta_refined": delta_refined(b),
           "berry_esseen": berry_esseen_term(b.kappa, b.sigma, b.n)}
    vb = variance_bound(b)
    out["variance_bound"] = asdict(vb)
    if b.h is not None and b.v_order is not None and b.approx_constant is not None:
        out["approximation_error"] = approximation_error(b.approx_constant, b.h, b.v_order, b.n,
                                                         sigma_h if sigma_h is not None else b.sigma)
    return out



@dataclass(frozen=True)
class PluginMoments:
    """Score moments estimated from the fitted per-observation moments ``psi``."""

    sigma: float
    kappa: float
    zeta: float
    moment_ratio: float
    berry_esseen: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self) | {"source": "plug-in"}


def plugin_moments(psi) -> PluginMoments:
    psi = np.asarray(psi, dtype=float)
    n = psi.size
    sigma = float(np.sqrt(np.mean(psi ** 2)))
    kappa = float(np.mean(np.abs(psi) ** 3) ** (1 / 3))
    zeta = float(np.mean(psi ** 4) ** 0.25)
    _require_scale(sigma)
    ratio = ((kappa / sigma) ** 3 + zeta ** 2) / math.sqrt(n)
    return PluginMoments(sigma, kappa, zeta, ratio, berry_esseen_term(kappa, sigma, n), n)

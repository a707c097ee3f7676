"""Compact-support kernels and kernel localization weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCovariateError, EmptyWindowError

KERNEL_KINDS = ("uniform", "epanechnikov", "biweight", "order4", "gaussian")

# half-width of the support before rescaling
_DEFAULT_HALF_WIDTH = {"uniform": 0.5, "epanechnikov": 1.0, "biweight": 1.0, "order4": 1.0, "gaussian": 1.0}


def _unit(kind, t):
    # profiles on |t| < 1, each integrating to one over (-1, 1)
    if kind == "uniform":
        return np.full_like(t, 0.5)
    t2 = t * t
    if kind == "epanechnikov":
        return 0.75 * (1.0 - t2)
    if kind == "biweight":
        return 0.9375 * (1.0 - t2) ** 2
    if kind == "order4":
        return (15.0 / 32.0) * (3.0 - 10.0 * t2 + 7.0 * t2 * t2)
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class Kernel:
    """Symmetric kernel with support ``(-half_width, half_width)``.

    ``order4`` is the fourth-order polynomial kernel (vanishing second
    moment) and takes negative values near the edge of its support.
    ``gaussian`` is the standard normal density scaled by ``half_width``;
    its support is the whole line.
    """

    kind: str = "epanechnikov"
    half_width: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if self.half_width is None:
            object.__setattr__(self, "half_width", _DEFAULT_HALF_WIDTH[self.kind])
        if not self.half_width > 0:
            raise ValueError("kernel half_width must be positive")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        a = self.half_width
        t = u / a
        if self.kind == "gaussian":
            out = np.exp(-0.5 * t * t) / (np.sqrt(2.0 * np.pi) * a)
            return out if out.ndim else float(out)
        inside = np.abs(t) < 1.0
        out = np.where(inside, _unit(self.kind, np.where(inside, t, 0.0)), 0.0) / a
        return out if out.ndim else float(out)

    @property
    def nonnegative(self) -> bool:
        return self.kind != "order4"

    @property
    def compact(self) -> bool:
        return self.kind != "gaussian"


def kernel_eval(kernel: Kernel, u):
    """K(u); zero outside the support."""
    return kernel(u)


SIDES = ("two-sided", "right", "left")


def _kernel_argument(values, point, bandwidth, side):
    z = np.asarray(values, dtype=float) - point
    if side == "two-sided":
        return z / bandwidth
    if side == "right":
        return (2.0 * z - bandwidth) / (2.0 * bandwidth)
    if side == "left":
        return (2.0 * z + bandwidth) / (2.0 * bandwidth)
    raise ValueError(f"side must be one of {SIDES}, got {side!r}")


@dataclass(frozen=True)
class LocalWeighting:
    """Nadaraya-Watson style weight ``K(u) / (h * omega)``.

    ``omega`` is the plug-in mean of ``K(u) / h`` over the sample the
    weighting was built from, so those weights average to exactly one.
    ``side="right"`` / ``"left"`` give the one-sided windows ``(c, c + h)``
    and ``(c - h, c)`` used at a discontinuity.
    """

    kernel: Kernel
    point: float
    bandwidth: float
    omega: float
    side: str = "two-sided"

    @classmethod
    def from_sample(cls, values, kernel: Kernel, point: float, bandwidth: float, side="two-sided"):
        if not bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth!r}")
        k = kernel(_kernel_argument(values, point, bandwidth, side))
        if not np.any(k != 0.0):
            raise EmptyWindowError(point, bandwidth)
        omega = float(np.mean(k / bandwidth))
        if not omega > 0:
            raise EmptyWindowError(point, bandwidth)
        return cls(kernel=kernel, point=float(point), bandwidth=float(bandwidth), omega=omega, side=side)

    def kernel_values(self, values):
        return self.kernel(_kernel_argument(values, self.point, self.bandwidth, self.side))

    def __call__(self, values):
        return self.kernel_values(values) / (self.bandwidth * self.omega)


def local_weights(values, kernel: Kernel, point: float, bandwidth: float, side="two-sided"):
    """Weights over ``values`` normalized by their own plug-in ``omega``."""
    w = LocalWeighting.from_sample(values, kernel, point, bandwidth, side)
    return w(values)


def bandwidth_heuristic(c_h: float, v_values, n: int | None = None) -> float:
    """``h = c_h * sd(v) * n**-0.2`` with the sample (ddof=1) standard deviation."""
    v = np.asarray(v_values, dtype=float)
    if n is None:
        n = v.shape[0]
    if not c_h > 0:
        raise ValueError("c_h must be positive")
    if n < 2 or v.shape[0] < 2:
        raise ValueError("need at least two observations")
    sd = float(np.std(v, ddof=1))
    if not sd > 0:
        raise DegenerateCovariateError("localization covariate has zero variance")
    return c_h * sd * n ** -0.2

"""Solver for l1-penalized convex quadratics in Gram form.

Minimizes ``0.5 * rho' G rho - M' rho + sum(pen * |rho|)``.  Both the
regression lasso (``G = X'X/n``, ``M = X'y/n``) and the Riesz representer
lasso reduce to this problem.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _cd_sweeps(G, M, pen, rho, Grho, tol, max_sweeps):
    p = G.shape[0]
    for sweep in range(max_sweeps):
        biggest = 0.0
        for j in range(p):
            old = rho[j]
            z = M[j] - (Grho[j] - G[j, j] * old)
            if z > pen[j]:
                new = (z - pen[j]) / G[j, j]
            elif z < -pen[j]:
                new = (z + pen[j]) / G[j, j]
            else:
                new = 0.0
            if new != old:
                delta = new - old
                for k in range(p):
                    Grho[k] += G[k, j] * delta
                rho[j] = new
                if abs(delta) > biggest:
                    biggest = abs(delta)
        if biggest < tol:
            return sweep + 1
    return max_sweeps


def objective(G, M, rho, pen):
    return float(0.5 * rho @ G @ rho - M @ rho + np.sum(pen * np.abs(rho)))


def kkt_residual(G, M, rho, pen):
    g = G @ rho - M
    active = rho != 0
    viol = np.where(active, np.abs(g + pen * np.sign(rho)), np.maximum(np.abs(g) - pen, 0.0))
    return float(viol.max(initial=0.0))


def _feature_sign(G, M, pen, rho, kkt_tol, max_iter):
    # feature-sign search: grow the active set one violator at a time, solve the
    # sign-restricted quadratic exactly, line-search over zero crossings
    p = M.shape[0]
    theta = np.sign(rho)
    last = np.inf
    for _ in range(max_iter):
        g = G @ rho - M
        nz = rho != 0
        if np.any(nz) and np.max(np.abs(g[nz] + pen[nz] * theta[nz])) > kkt_tol:
            pass
        else:
            viol = np.where(nz, -np.inf, np.abs(g) - pen)
            i = int(np.argmax(viol))
            if viol[i] <= kkt_tol:
                return rho, True
            theta[i] = -np.sign(g[i])
        A = np.flatnonzero((rho != 0) | (theta != 0))
        GA = G[np.ix_(A, A)]
        try:
            sol = np.linalg.solve(GA, M[A] - pen[A] * theta[A])
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(GA, M[A] - pen[A] * theta[A], rcond=None)[0]
        cur = rho[A]
        step = sol - cur
        ts = [1.0]
        cross = (cur != 0) & (np.sign(sol) != np.sign(cur))
        ts.extend(float(t) for t in cur[cross] / (cur[cross] - sol[cross]) if 0.0 < t < 1.0)
        best, best_t = np.inf, 1.0
        for t in ts:
            x = cur + t * step
            f = 0.5 * x @ GA @ x - M[A] @ x + pen[A] @ np.abs(x)
            if f < best:
                best, best_t = f, t
        x = cur + best_t * step
        if best_t < 1.0:
            # the coordinate that hit zero leaves the active set
            k = np.argmin(np.abs(best_t - np.where(cross, cur / np.where(cross, cur - sol, 1.0), np.inf)))
            x[k] = 0.0
        rho = rho.copy()
        rho[A] = x
        theta = np.sign(rho)
        f = objective(G, M, rho, pen)
        if not f < last:
            # no progress: the Gram block is numerically singular
            return rho, False
        last = f
    return rho, False


def solve_l1_quadratic(G, M, pen, *, start=None, kkt_tol=1e-10, tol=1e-13, sweeps_per_round=200,
                       max_rounds=50):
    """Exact active-set solve, finished with coordinate-descent sweeps if needed.

    Returns ``(rho, kkt_residual, converged, sweeps)``.
    """
    G = np.ascontiguousarray(G, dtype=float)
    M = np.ascontiguousarray(M, dtype=float)
    pen = np.ascontiguousarray(np.broadcast_to(pen, M.shape), dtype=float)
    p = M.shape[0]
    rho = np.zeros(p) if start is None else np.array(start, dtype=float)
    if p == 0:
        return rho, 0.0, True, 0
    rho, _ = _feature_sign(G, M, pen, rho, kkt_tol, max_iter=20 * p + 100)
    kkt = kkt_residual(G, M, rho, pen)
    total = 0
    for _ in range(max_rounds):
        if kkt <= kkt_tol:
            return rho, kkt, True, total
        Grho = G @ rho
        total += _cd_sweeps(G, M, pen, rho, Grho, tol, sweeps_per_round)
        kkt = kkt_residual(G, M, rho, pen)
    return rho, kkt, kkt <= kkt_tol, total

"""Batched exponentiated-gradient ascent on probability simplices.

Every row of the batch is an independent problem: a point on a simplex (zero
coordinates stay zero, so a start also fixes the face being searched), its
own step size, and its own stopping decision. The objective callback receives
the current points together with the row indices they belong to, which lets
callers attach per-row parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

Objective = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class AscentResult:
    x: np.ndarray
    value: np.ndarray
    iterations: int
    converged: np.ndarray


def sobol_simplex(n: int, dim: int, seed: int) -> np.ndarray:
    """``n`` deterministic low-discrepancy points spread over the ``dim``-simplex."""
    if n <= 0:
        return np.empty((0, dim))
    if dim == 1:
        return np.ones((n, 1))
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u = sampler.random_base2(m)[:n]
    # exponential spacings give Dirichlet(1) points
    e = -np.log1p(-np.clip(u, 0.0, 1.0 - 1e-12))
    e += 1e-9
    return e / e.sum(axis=1, keepdims=True)


def ascend(
    fun: Objective,
    x0: np.ndarray,
    max_iter: int = 2000,
    tol: float = 1e-11,
    patience: int = 25,
    ftol: float = 1e-12,
    window: int = 50,
    groups: np.ndarray | None = None,
    cull_after: int = 100,
    cull_gap: float = 1e-3,
) -> AscentResult:
    """Maximize each row of ``x0`` with multiplicative (mirror) steps and backtracking.

    A row stops when its Frank-Wolfe gap ``max_i g_i - <x, g>`` over the support
    drops below ``tol``, when its step size collapses, or when ``patience``
    consecutive steps fail to raise the value by more than rounding noise, or
    when the value gains less than ``ftol`` (relative to ``max(1, |value|)``)
    over a window of ``window`` iterations. The value-based stops matter
    because near a smooth optimum the value moves by roughly the square of the
    gap, so gaps below about 1e-8 are invisible in float64.

    With ``groups`` (one label per row, e.g. the parameter tuple a start
    belongs to), rows trailing the best row of their group by more than
    ``cull_gap * max(1, |best|)`` after ``cull_after`` iterations are dropped.
    Dropped rows keep their current point and are not marked converged.
    """
    x = np.array(x0, dtype=float)
    b = x.shape[0]
    rows = np.arange(b)
    val, grad = fun(x, rows)
    support = x > 0
    spread = np.where(support, grad, -np.inf).max(axis=1) - np.where(support, grad, np.inf).min(axis=1)
    eta = 1.0 / np.maximum(spread, 1e-12)
    eta = np.minimum(eta, 1e6)
    active = np.isfinite(val)
    converged = np.zeros(b, dtype=bool)
    flat = np.zeros(b, dtype=int)
    checkpoint = val.copy()
    it = 0
    for it in range(1, max_iter + 1):
        ids = rows[active]
        if ids.size == 0:
            break
        xs = x[ids]
        g = grad[ids]
        sup = xs > 0
        gmax = np.where(sup, g, -np.inf).max(axis=1, keepdims=True)
        gap = gmax[:, 0] - np.sum(np.where(sup, xs * g, 0.0), axis=1)
        done = gap < tol
        if np.any(done):
            converged[ids[done]] = True
            active[ids[done]] = False
            keep = ~done
            ids, xs, g, sup, gmax = ids[keep], xs[keep], g[keep], sup[keep], gmax[keep]
            if ids.size == 0:
                break
        expo = np.where(sup, eta[ids, None] * (g - gmax), -np.inf)
        xn = xs * np.exp(expo)
        xn /= xn.sum(axis=1, keepdims=True)
        vn, gn = fun(xn, ids)
        old = val[ids]
        noise = 1e-14 * np.maximum(1.0, np.abs(old))
        ok = np.isfinite(vn) & (vn >= old - noise)
        gained = ok & (vn > old + noise)
        flat[ids[gained]] = 0
        flat[ids[~gained]] += 1
        acc = ids[ok]
        x[acc] = xn[ok]
        val[acc] = vn[ok]
        grad[acc] = gn[ok]
        eta[acc] = np.minimum(eta[acc] * 1.5, 1e12)
        rej = ids[~ok]
        eta[rej] *= 0.25
        stalled = (eta[ids] * np.maximum(np.abs(g).max(axis=1), 1e-300) < 1e-15) | (flat[ids] >= patience)
        if groups is not None and it == cull_after:
            best = np.full(int(groups.max()) + 1, -np.inf)
            np.maximum.at(best, groups, np.where(np.isfinite(val), val, -np.inf))
            lead = best[groups[ids]]
            behind = val[ids] < lead - cull_gap * np.maximum(1.0, np.abs(lead))
            active[ids[behind]] = False
            keep = ~behind
            ids, stalled = ids[keep], stalled[keep]
        if it % window == 0:
            slow = val[ids] - checkpoint[ids] < ftol * np.maximum(1.0, np.abs(val[ids]))
            stalled |= slow
            checkpoint[ids] = val[ids]
        if np.any(stalled):
            converged[ids[stalled]] = True
            active[ids[stalled]] = False
    return AscentResult(x=x, value=val, iterations=it, converged=converged)

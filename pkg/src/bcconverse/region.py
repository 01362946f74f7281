"""Capacity region of the asymmetric broadcast channel via supporting hyperplanes.

For a normal parametrized by ``(gamma, mu)`` the hyperplane value is

    C(gamma, mu) = max_p  gamma*mu*I(X;Y|U) + gamma*(1-mu)*I(U;Z) + (1-gamma)*I(X;Y)

over structured joints ``p_U p_{X|U} W1 W2``. Substituting ``r3 = R1 + R2`` maps
the hyperplane to the rate-plane halfplane

    (gamma*mu + 1-gamma) R1 + (gamma*(1-mu) + 1-gamma) R2 <= C(gamma, mu),

and the region is the intersection of those halfplanes with the quadrant.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .channels import AuxInputLaw, ChannelPair, region_aux_size, structured_joint, test_aux_size
from .probability import (
    JointDistUXYZ,
    StochasticMatrix,
    _info_triple,
    _marginal,
    _safe_log,
    _xlogx,
    divergence_y,
    divergence_z,
)
from .simplex import ascend, sobol_simplex

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperplaneParams:
    gamma: float
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.mu <= 0.5:
            raise ValueError(f"mu must lie in [0, 1/2], got {self.mu}")

    @property
    def weights(self) -> tuple[float, float, float]:
        """Weights on ``(I(X;Y|U), I(U;Z), I(X;Y))``."""
        g, m = self.gamma, self.mu
        return g * m, g * (1 - m), 1 - g

    @property
    def rate_coefficients(self) -> tuple[float, float]:
        g, m = self.gamma, self.mu
        return g * m + (1 - g), g * (1 - m) + (1 - g)


@dataclass(frozen=True)
class OptimizerBudget:
    """Multi-start settings shared by all inner maximizations."""

    starts: int = 8
    max_iter: int = 3000
    tol: float = 1e-11
    seed: int = 0
    ftol: float = 1e-12


class CapacityNotConverged(RuntimeError):
    def __init__(self, lower: float, upper: float):
        super().__init__(f"Blahut-Arimoto did not converge: capacity in [{lower}, {upper}]")
        self.lower = lower
        self.upper = upper


def blahut_arimoto(w: StochasticMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> tuple[float, np.ndarray]:
    """Capacity (nats) and an optimal input law of a single-user channel.

    Stops when the standard bracket ``ln sum_x r(x) c(x) <= C <= ln max_x c(x)``,
    with ``c(x) = exp D(W(.|x) || rW)``, is narrower than ``tol``.
    """
    rows = w.rows
    r = np.full(rows.shape[0], 1.0 / rows.shape[0])
    lower = upper = 0.0
    for _ in range(max_iter):
        q = r @ rows
        d = np.sum(np.where(rows > 0, rows * (_safe_log(rows) - _safe_log(q)[None, :]), 0.0), axis=1)
        dmax = d.max()
        c = np.exp(d - dmax)
        s = r @ c
        lower = float(np.log(s) + dmax)
        upper = float(dmax)
        if upper - lower < tol:
            return lower, r
        r = r * c / s
    raise CapacityNotConverged(lower, upper)


def ba_capacity(w: StochasticMatrix, tol: float = 1e-12) -> float:
    return blahut_arimoto(w, tol)[0]


def eval_C_p(aux: AuxInputLaw, ch: ChannelPair) -> tuple[float, float, float]:
    """``(I(X;Y|U), I(U;Z), I(X;Y))`` of the joint induced by ``aux``."""
    q = structured_joint(aux.joint_ux(), ch)
    a, b, c = _info_triple(q)
    return float(a), float(b), float(c)


# ---------------------------------------------------------------------------
# hyperplane values
# ---------------------------------------------------------------------------

def _structured_objective(ch: ChannelPair, weights: np.ndarray, nu: int):
    """Weighted information sum and its gradient in the joint ``r[u, x]``."""
    w1, w2 = ch.w1.rows, ch.w2.rows
    nx = ch.nx
    h1 = -_xlogx(w1).sum(axis=1)

    def fun(flat, ids):
        r = flat.reshape(-1, nu, nx)
        a, b, c = (weights[ids, k] for k in range(3))
        pu = r.sum(axis=2)
        puy = r @ w1
        puz = r @ w2
        py = puy.sum(axis=1)
        pz = puz.sum(axis=1)
        hyx = np.einsum("bux,x->b", r, h1)
        h_u = -_xlogx(pu).sum(axis=1)
        h_uy = -_xlogx(puy).sum(axis=(1, 2))
        h_uz = -_xlogx(puz).sum(axis=(1, 2))
        h_y = -_xlogx(py).sum(axis=1)
        h_z = -_xlogx(pz).sum(axis=1)
        val = a * (h_uy - h_u - hyx) + b * (h_u + h_z - h_uz) + c * (h_y - hyx)
        # d/dr(u,x) of each entropy, dropping the constants that cancel on the simplex
        d_uy = -_safe_log(puy) @ w1.T
        d_uz = -_safe_log(puz) @ w2.T
        d_u = -_safe_log(pu)[:, :, None]
        d_y = -(_safe_log(py) @ w1.T)[:, None, :]
        d_z = -(_safe_log(pz) @ w2.T)[:, None, :]
        grad = (
            a[:, None, None] * (d_uy - d_u - h1)
            + b[:, None, None] * (d_u + d_z - d_uz)
            + c[:, None, None] * (d_y - h1)
        )
        return val, grad.reshape(len(ids), -1)

    return fun


def _structured_starts(ch: ChannelPair, nu: int, budget: OptimizerBudget) -> np.ndarray:
    nx = ch.nx
    starts = []
    maps = itertools.islice(itertools.product(range(nx), repeat=nu), 64)
    uniform = np.full((nu, nx), 1.0 / (nu * nx))
    for f in maps:
        corner = np.zeros((nu, nx))
        corner[np.arange(nu), list(f)] = 1.0 / nu
        starts.append(corner)
        starts.append(0.95 * corner + 0.05 * uniform)
    _, p_star = blahut_arimoto(ch.w1, tol=1e-10)
    starts.append(np.outer(np.full(nu, 1.0 / nu), p_star))
    starts.append(uniform)
    for p in sobol_simplex(budget.starts, nu * nx, budget.seed):
        starts.append(p.reshape(nu, nx))
    return np.array(starts).reshape(len(starts), nu * nx)


def hyperplane_values(
    ch: ChannelPair,
    params: list[HyperplaneParams],
    budget: OptimizerBudget = OptimizerBudget(),
    nu: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched hyperplane values.

    Returns ``(values, argmax r[u, x] per point, converged flag per point)``.
    """
    nu = nu or region_aux_size(ch.nx, ch.ny, ch.nz)
    starts = _structured_starts(ch, nu, budget)
    s = starts.shape[0]
    g = len(params)
    weights = np.repeat(np.array([hp.weights for hp in params], float).reshape(g, 3), s, axis=0)
    x0 = np.tile(starts, (g, 1))
    res = ascend(
        _structured_objective(ch, weights, nu),
        x0,
        budget.max_iter,
        budget.tol,
        ftol=budget.ftol,
        groups=np.repeat(np.arange(g), s),
    )
    vals = res.value.reshape(g, s)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    best = np.argmax(vals, axis=1)
    idx = np.arange(g) * s + best
    conv = res.converged.reshape(g, s).any(axis=1)
    return vals[np.arange(g), best], res.x[idx].reshape(g, nu, ch.nx), conv


def hyperplane_value(
    hp: HyperplaneParams, ch: ChannelPair, budget: OptimizerBudget = OptimizerBudget(), nu: int | None = None
) -> tuple[float, AuxInputLaw]:
    """Best hyperplane value found for one normal, with the achieving ``(p_U, p_{X|U})``."""
    vals, rs, _ = hyperplane_values(ch, [hp], budget, nu)
    return float(vals[0]), AuxInputLaw.from_joint_ux(rs[0])


# ---------------------------------------------------------------------------
# relaxed hyperplane values over unconstrained joints
# ---------------------------------------------------------------------------

# (subset, coefficient builder) pairs: objective = sum c_S H(q_S) + E_q[linear]
def _tilde_coefficients(alpha, beta, gamma, mu):
    gm, gmb, gb = gamma * mu, gamma * (1 - mu), 1 - gamma
    return {
        "uxyz": alpha + beta,
        "uxz": -alpha,
        "uxy": -beta - gm,
        "ux": gm,
        "uy": gm,
        "u": -gm + gmb,
        "z": gmb,
        "uz": -gmb,
        "x": gb,
        "y": gb,
        "xy": -gb,
    }


def _entropy_combo(coeffs: dict[str, np.ndarray], linear: np.ndarray):
    """Objective ``sum_S c_S H(q_S) + <q, linear>`` with per-row coefficients."""

    def fun(flat, ids, shape):
        q = flat.reshape((len(ids),) + shape)
        val = np.einsum("buxyz,buxyz->b", q, linear[ids])
        grad = linear[ids].copy()
        for subset, c in coeffs.items():
            cs = c[ids][:, None, None, None, None]
            m = _marginal(q, subset)
            lm = _safe_log(m)
            val = val - c[ids] * np.sum(_xlogx(m).reshape(len(ids), -1), axis=1)
            grad = grad - cs * lm
        return val, grad.reshape(len(ids), -1)

    return fun


@dataclass(frozen=True)
class TildeResult:
    value: float
    argmax: np.ndarray  # q[u, x, y, z]
    divergences: tuple[float, float]


def _tilde_setup(ch: ChannelPair, alphas, betas, hp: HyperplaneParams, nu: int):
    w1, w2 = ch.w1.rows, ch.w2.rows
    alive = (w1[:, :, None] > 0) & (w2[:, None, :] > 0)
    alive = np.broadcast_to(alive, (nu,) + alive.shape)
    lw1 = np.where(w1 > 0, _safe_log(w1), 0.0)[None, :, :, None]
    lw2 = np.where(w2 > 0, _safe_log(w2), 0.0)[None, :, None, :]
    alphas = np.asarray(alphas, float)
    betas = np.asarray(betas, float)
    linear = alphas[:, None, None, None, None] * lw1 + betas[:, None, None, None, None] * lw2
    linear = np.where(alive, linear, 0.0)
    coeffs = _tilde_coefficients(alphas, betas, hp.gamma, hp.mu)
    coeffs = {k: np.broadcast_to(np.asarray(v, float), alphas.shape).copy() for k, v in coeffs.items()}
    return alive, coeffs, linear


def _tilde_starts(ch: ChannelPair, hp: HyperplaneParams, nu: int, budget: OptimizerBudget, alive, extra):
    shape = (nu, ch.nx, ch.ny, ch.nz)
    _, aux = hyperplane_value(hp, ch, budget)
    lifted = np.zeros(shape)
    p = aux.joint_ux()
    lifted[: p.shape[0]] = structured_joint(p, ch)
    uni = alive / alive.sum()
    starts = [lifted, 0.9 * lifted + 0.1 * uni, uni]
    n_alive = int(alive.sum())
    for pt in sobol_simplex(budget.starts, n_alive, budget.seed + 1):
        s = np.zeros(shape)
        s[alive] = pt
        starts.append(s)
    for q in extra or []:
        q = np.where(alive, q, 0.0)
        if q.sum() > 0:
            starts.append(q / q.sum())
    return np.array(starts)


def relaxation_curve(
    alphas,
    betas,
    hp: HyperplaneParams,
    ch: ChannelPair,
    budget: OptimizerBudget = OptimizerBudget(),
    nu: int | None = None,
    extra_starts=None,
) -> list[TildeResult]:
    """Relaxed hyperplane values for several ``(alpha, beta)`` pairs of one normal.

    Every local optimum found for any pair is kept in a shared pool, and each
    reported value is the best pool member for its own pair.
    """
    nu = nu or test_aux_size(ch.ny, ch.nz)
    shape = (nu, ch.nx, ch.ny, ch.nz)
    alphas = np.atleast_1d(np.asarray(alphas, float))
    betas = np.atleast_1d(np.asarray(betas, float))
    if np.any(alphas <= 0) or np.any(betas <= 0):
        raise ValueError("alpha and beta must be positive")
    k = alphas.size
    alive, coeffs, linear = _tilde_setup(ch, alphas, betas, hp, nu)
    starts = _tilde_starts(ch, hp, nu, budget, alive, extra_starts)
    s = starts.shape[0]
    fun = _entropy_combo(coeffs, linear)
    row_of = np.repeat(np.arange(k), s)

    def batched(flat, ids):
        return fun(flat, row_of[ids], shape)

    x0 = np.tile(starts.reshape(s, -1), (k, 1))
    res = ascend(batched, x0, budget.max_iter, budget.tol, ftol=budget.ftol, groups=row_of)
    pool = np.concatenate([starts.reshape(s, -1), res.x])
    # score every pool member under every (alpha, beta)
    m = pool.shape[0]
    rows = np.repeat(np.arange(k), m)
    vals, _ = fun(np.tile(pool, (k, 1)), rows, shape)
    vals = np.where(np.isfinite(vals), vals, -np.inf).reshape(k, m)
    best = np.argmax(vals, axis=1)
    out = []
    for i in range(k):
        q = pool[best[i]].reshape(shape)
        j = JointDistUXYZ(q / q.sum())
        out.append(TildeResult(float(vals[i, best[i]]), q, (divergence_y(j, ch.w1), divergence_z(j, ch.w2))))
    return out


def tilde_hyperplane_value(
    alpha: float,
    beta: float,
    hp: HyperplaneParams,
    ch: ChannelPair,
    budget: OptimizerBudget = OptimizerBudget(),
    nu: int | None = None,
) -> TildeResult:
    """Relaxed hyperplane value: divergence-penalized maximum over unconstrained joints."""
    return relaxation_curve([alpha], [beta], hp, ch, budget, nu)[0]


def tilde_objective(q: np.ndarray, alpha: float, beta: float, hp: HyperplaneParams, ch: ChannelPair) -> float:
    """The relaxed objective at a fixed joint ``q`` (``-inf`` off the channel support)."""
    q = np.asarray(q, float)
    nu = q.shape[0]
    alive, coeffs, linear = _tilde_setup(ch, [alpha], [beta], hp, nu)
    if np.any((q > 0) & ~alive):
        return float("-inf")
    val, _ = _entropy_combo(coeffs, linear)(q.reshape(1, -1), np.array([0]), q.shape)
    return float(val[0])


# ---------------------------------------------------------------------------
# polygon
# ---------------------------------------------------------------------------

def hyperplane_grid(n_gamma: int = 65, n_mu: int = 33) -> list[HyperplaneParams]:
    if n_gamma < 1 or n_mu < 1:
        raise ValueError("grid must be nonempty")
    gs = np.linspace(0.0, 1.0, n_gamma) if n_gamma > 1 else np.array([0.0])
    ms = np.linspace(0.0, 0.5, n_mu) if n_mu > 1 else np.array([0.0])
    return [HyperplaneParams(float(g), float(m)) for g in gs for m in ms]


@dataclass(frozen=True)
class RegionBoundary:
    halfplanes: np.ndarray  # rows (a1, a2, offset): a1*R1 + a2*R2 <= offset
    vertices: np.ndarray  # (M, 2), counter-clockwise
    params: list[HyperplaneParams] = field(default_factory=list)
    values: np.ndarray = field(default_factory=lambda: np.empty(0))
    argmax: np.ndarray = field(default_factory=lambda: np.empty(0))
    partial: bool = False
    unconverged: int = 0

    @property
    def max_r1(self) -> float:
        return float(self.vertices[:, 0].max())

    @property
    def max_r2(self) -> float:
        return float(self.vertices[:, 1].max())


def _clip(poly: np.ndarray, a: np.ndarray, c: float) -> np.ndarray:
    """Clip a convex polygon (vertex loop) to ``a . p <= c``."""
    if len(poly) == 0:
        return poly
    out = []
    n = len(poly)
    vals = poly @ a - c
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp <= 1e-12:
            out.append(p)
        if (vp < -1e-12 and vq > 1e-12) or (vp > 1e-12 and vq < -1e-12):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def _dedup(poly: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    pts: list[np.ndarray] = []
    for p in poly:
        if not pts or np.max(np.abs(p - pts[-1])) > tol:
            pts.append(p)
    while len(pts) > 1 and np.max(np.abs(pts[0] - pts[-1])) <= tol:
        pts.pop()
    return np.array(pts).reshape(-1, 2)


def polygon_from_halfplanes(halfplanes: np.ndarray) -> np.ndarray:
    """Vertices of ``{R >= 0} ∩ halfplanes``, counter-clockwise from the origin."""
    big = 2.0 * float(np.max(np.abs(halfplanes[:, 2]), initial=0.0)) + 1.0
    poly = np.array([[0.0, 0.0], [big, 0.0], [big, big], [0.0, big]])
    for a1, a2, c in halfplanes:
        poly = _dedup(_clip(poly, np.array([a1, a2]), c))
    return poly


def region_boundary(
    ch: ChannelPair,
    grid: tuple[int, int] | list[HyperplaneParams] = (65, 33),
    budget: OptimizerBudget = OptimizerBudget(),
) -> RegionBoundary:
    """Capacity region polygon from a sweep of supporting hyperplanes."""
    params = hyperplane_grid(*grid) if isinstance(grid, tuple) else list(grid)
    if not params:
        raise ValueError("grid must be nonempty")
    vals, rs, conv = hyperplane_values(ch, params, budget)
    ok = np.isfinite(vals)
    coef = np.array([hp.rate_coefficients for hp in params]).reshape(-1, 2)
    hps = np.column_stack([coef, vals])[ok]
    verts = polygon_from_halfplanes(hps)
    if not np.all(ok):
        logger.warning("%d hyperplane evaluations failed; region is partial", int((~ok).sum()))
    return RegionBoundary(
        halfplanes=hps,
        vertices=verts,
        params=params,
        values=vals,
        argmax=rs,
        partial=bool(not np.all(ok)),
        unconverged=int((~conv).sum()),
    )


Membership = Literal["inside", "outside", "boundary"]


def halfplane_slack(r1: float, r2: float, boundary: RegionBoundary) -> float:
    h = boundary.halfplanes
    return float(np.min(h[:, 2] - h[:, 0] * r1 - h[:, 1] * r2))


def region_membership(r1: float, r2: float, boundary: RegionBoundary, tol: float = 1e-6) -> Membership:
    """Classify a rate pair by its smallest halfplane slack.

    The quadrant constraints only decide ``outside`` (for clearly negative
    rates); the origin itself counts as inside.
    """
    if r1 < -tol or r2 < -tol:
        return "outside"
    slack = halfplane_slack(r1, r2, boundary)
    if slack > tol:
        return "inside"
    if slack >= -tol:
        return "boundary"
    return "outside"


def distance_to_region(r1: float, r2: float, boundary: RegionBoundary) -> float:
    """Euclidean distance from a rate pair to the polygon (0 inside)."""
    p = np.array([r1, r2], float)
    v = boundary.vertices
    if r1 >= 0 and r2 >= 0 and halfplane_slack(r1, r2, boundary) >= 0:
        return 0.0
    if len(v) == 1:
        return float(np.linalg.norm(p - v[0]))
    best = np.inf
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        d = b - a
        t = 0.0 if not d.any() else float(np.clip((p - a) @ d / (d @ d), 0.0, 1.0))
        best = min(best, float(np.linalg.norm(p - (a + t * d))))
    return best


def sum_rate_segment(boundary: RegionBoundary, capacity: float, tol: float = 1e-6) -> float:
    """Length of the boundary portion on the line ``R1 + R2 = capacity``.

    Reported empirically; it can shrink to zero, leaving only ``(C(W1), 0)``.
    """
    v = boundary.vertices
    on = v[np.abs(v.sum(axis=1) - capacity) <= tol]
    if len(on) < 2:
        return 0.0
    return float(np.sqrt(2.0) * (on[:, 1].max() - on[:, 1].min()))

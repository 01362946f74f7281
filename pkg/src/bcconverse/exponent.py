"""Tilted information weights, their exponential moments, and the converse exponent.

For a test joint ``q`` on ``U x X x Y x Z`` the tilted weight of an outcome is

    omega = alpha ln W1/q_{Y|XZU} + beta ln W2/q_{Z|XYU}
            + gamma [ mu ln W1/q_{Y|U} + (1-mu) ln q_{Z|U}/q_Z ] + (1-gamma) ln W1/q_Y.

Writing every conditional as a ratio of marginals of ``q`` turns this into

    omega(a) = c0(a) + sum_S c_S ln q_S(a_S),

with ``c0 = (alpha + gamma mu + 1 - gamma) ln W1 + beta ln W2`` and the
coefficients in :func:`omega_coefficients`. The moment functional is
``Omega(q) = ln sum_a q(a) exp(lam * omega(a))`` and the exponent at one
parameter tuple is

    F(params) = (lam * [a1 R1 + a2 R2] - max_q Omega(q)) / (1 + lam [1 + alpha + beta + (2 - 3 mu) gamma]).
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelPair, structured_joint, test_aux_size
from .probability import (
    AXES,
    JointDistUXYZ,
    ValidationError,
    _info_triple,
    _marginal,
    _safe_log,
    divergence_y,
    divergence_y_given_x,
    divergence_y_given_xu,
    divergence_z,
)
from .region import (
    HyperplaneParams,
    OptimizerBudget,
    RegionBoundary,
    hyperplane_grid,
    hyperplane_values,
)
from .simplex import ascend, sobol_simplex

logger = logging.getLogger(__name__)

MARGINALS = ("uxyz", "uxz", "uxy", "uy", "u", "uz", "z", "y")


@dataclass(frozen=True)
class ExponentParams:
    """``(alpha, beta, gamma, mu, lam)``; ``lam = 0`` is accepted for the trivial limit."""

    alpha: float
    beta: float
    gamma: float
    mu: float
    lam: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.mu <= 0.5:
            raise ValueError(f"mu must lie in [0, 1/2], got {self.mu}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def hyperplane(self) -> HyperplaneParams:
        return HyperplaneParams(self.gamma, self.mu)

    @property
    def denominator(self) -> float:
        return 1.0 + self.lam * (1.0 + self.alpha + self.beta + (2.0 - 3.0 * self.mu) * self.gamma)

    @property
    def rate_coefficients(self) -> tuple[float, float]:
        return self.hyperplane.rate_coefficients

    def with_lam(self, lam: float) -> "ExponentParams":
        return ExponentParams(self.alpha, self.beta, self.gamma, self.mu, lam)

    def key(self) -> tuple[float, ...]:
        return (self.alpha, self.beta, self.gamma, self.mu, self.lam)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "mu": self.mu, "lambda": self.lam}


def omega_coefficients(alpha, beta, gamma, mu) -> dict[str, np.ndarray]:
    """Coefficient of ``ln q_S`` in the tilted weight, for each marginal ``S``."""
    gm = np.asarray(gamma) * np.asarray(mu)
    gmb = np.asarray(gamma) * (1 - np.asarray(mu))
    return {
        "uxyz": -(np.asarray(alpha) + np.asarray(beta)),
        "uxz": np.asarray(alpha, float),
        "uxy": np.asarray(beta, float),
        "uy": -gm,
        "u": gm - gmb,
        "uz": gmb,
        "z": -gmb,
        "y": -(1 - np.asarray(gamma, float)),
    }


def _channel_logs(ch: ChannelPair, nu: int):
    w1, w2 = ch.w1.rows, ch.w2.rows
    alive = np.broadcast_to((w1[:, :, None] > 0) & (w2[:, None, :] > 0), (nu, ch.nx, ch.ny, ch.nz))
    lw1 = np.broadcast_to(np.where(w1 > 0, _safe_log(w1), 0.0)[None, :, :, None], alive.shape)
    lw2 = np.broadcast_to(np.where(w2 > 0, _safe_log(w2), 0.0)[None, :, None, :], alive.shape)
    return alive, lw1, lw2


class _Tilt:
    """Batched tilted weight and moment functional for one channel and many parameter rows."""

    def __init__(self, ch: ChannelPair, params: list[ExponentParams], nu: int):
        self.shape = (nu, ch.nx, ch.ny, ch.nz)
        self.alive, lw1, lw2 = _channel_logs(ch, nu)
        p = np.array([e.key() for e in params], float).reshape(-1, 5)
        a, b, g, m, lam = p.T
        self.lam = lam
        self.coeffs = omega_coefficients(a, b, g, m)
        w1coef = a + g * m + (1 - g)
        self.const = w1coef[:, None, None, None, None] * lw1 + b[:, None, None, None, None] * lw2

    def omega(self, q: np.ndarray, ids: np.ndarray) -> np.ndarray:
        """Tilted weight; ``-inf`` off the support of ``q`` and on dead channel atoms."""
        out = self.const[ids].copy()
        for s in MARGINALS:
            out += self.coeffs[s][ids][:, None, None, None, None] * _safe_log(_marginal(q, s))
        return np.where((q > 0) & self.alive, out, -np.inf)

    def value(self, q: np.ndarray, ids: np.ndarray) -> np.ndarray:
        om = self.omega(q, ids)
        lam = self.lam[ids]
        t = np.where(np.isfinite(om), _safe_log(q) + lam[:, None, None, None, None] * om, -np.inf)
        t = t.reshape(len(ids), -1)
        tmax = t.max(axis=1)
        with np.errstate(invalid="ignore"):
            s = np.exp(t - tmax[:, None]).sum(axis=1)
        return np.where(np.isfinite(tmax), tmax + np.log(s), -np.inf)

    def value_and_grad(self, flat: np.ndarray, ids: np.ndarray):
        b = len(ids)
        q = flat.reshape((b,) + self.shape)
        om = self.omega(q, ids)
        lam = self.lam[ids][:, None, None, None, None]
        live = np.isfinite(om)
        lom = np.where(live, lam * om, -np.inf)
        t = np.where(live, _safe_log(q) + lom, -np.inf)
        tmax = t.reshape(b, -1).max(axis=1)
        tm = tmax[:, None, None, None, None]
        g = np.exp(t - tm)
        s = g.reshape(b, -1).sum(axis=1)
        val = tmax + np.log(s)
        # d/dq(b) of sum_a q(a) exp(lam omega(a)), rescaled by exp(-tmax)
        grad = np.exp(np.minimum(np.where(live, lom - tm, -np.inf), 700.0))
        for k in MARGINALS:
            gk = _marginal(g, k)
            mk = _marginal(q, k)
            c = self.coeffs[k][ids][:, None, None, None, None]
            grad = grad + lam * c * np.divide(gk, mk, out=np.zeros_like(gk), where=mk > 0)
        grad = grad / s[:, None, None, None, None]
        return val, grad.reshape(b, -1)


def _as_mass(q) -> np.ndarray:
    return q.mass if isinstance(q, JointDistUXYZ) else JointDistUXYZ(q).mass


def _check_shape(q: np.ndarray, ch: ChannelPair):
    if q.shape[1:] != (ch.nx, ch.ny, ch.nz):
        raise ValidationError(f"joint has shape {q.shape}, channel needs (|U|, {ch.nx}, {ch.ny}, {ch.nz})")


def omega_weight(q, ch: ChannelPair, ep: ExponentParams, point: tuple[int, int, int, int]) -> float:
    """Tilted weight at one outcome ``(u, x, y, z)`` with ``q(point) > 0``."""
    m = _as_mass(q)
    _check_shape(m, ch)
    if m[point] <= 0:
        raise ValueError(f"tilted weight evaluated at zero-mass outcome {point}")
    tilt = _Tilt(ch, [ep], m.shape[0])
    return float(tilt.omega(m[None], np.array([0]))[(0,) + tuple(point)])


def omega_weights(q, ch: ChannelPair, ep: ExponentParams) -> np.ndarray:
    """Tilted weight at every outcome (``-inf`` where ``q`` or the channel vanishes)."""
    m = _as_mass(q)
    _check_shape(m, ch)
    return _Tilt(ch, [ep], m.shape[0]).omega(m[None], np.array([0]))[0]


def omega_functional(q, ch: ChannelPair, ep: ExponentParams) -> float:
    """``ln sum_a q(a) exp(lam * omega(a))`` computed by a shifted log-sum-exp."""
    m = _as_mass(q)
    _check_shape(m, ch)
    tilt = _Tilt(ch, [ep], m.shape[0])
    if not np.any((m > 0) & tilt.alive):
        raise ValueError("q has no mass on outcomes the channel can produce")
    if ep.lam == 0:
        return 0.0
    return float(tilt.value(m[None], np.array([0]))[0])


def omega_slope_at_zero(q, ch: ChannelPair, ep: ExponentParams) -> float:
    """``E_q[omega]``, the derivative of the moment functional at ``lam = 0``."""
    m = _as_mass(q)
    om = omega_weights(m, ch, ep)
    if np.any((m > 0) & ~np.isfinite(om)):
        return float("-inf")
    return float(np.sum(m * np.where(m > 0, om, 0.0)))


def omega_curvature(q, ch: ChannelPair, ep: ExponentParams) -> float:
    """Second derivative in ``lam`` by the pairwise sum

        (1/2) sum_{a,b} p(a) p(b) (omega(a) - omega(b))^2,  p proportional to q exp(lam omega),

    i.e. the variance of the tilted weight under the tilted law.
    """
    m = _as_mass(q)
    om = omega_weights(m, ch, ep).ravel()
    mass = m.ravel()
    live = (mass > 0) & np.isfinite(om)
    om, mass = om[live], mass[live]
    t = np.log(mass) + ep.lam * om
    p = np.exp(t - t.max())
    p /= p.sum()
    diff = om[:, None] - om[None, :]
    return float(0.5 * np.sum(p[:, None] * p[None, :] * diff**2))


@dataclass(frozen=True)
class SlopeDecomposition:
    """``E_q[omega]`` split into divergence and information terms.

    ``exact`` is the direct expectation. ``short_form`` omits the
    ``-(1-gamma) D(q_{Y|X} || W1 | q_X)`` term; ``difference = exact - short_form``
    records that term so the two readings of the slope can be compared.
    """

    exact: float
    terms: dict
    short_form: float
    difference: float


def slope_decomposition(q, ch: ChannelPair, ep: ExponentParams) -> SlopeDecomposition:
    j = JointDistUXYZ(_as_mass(q))
    g, mu = ep.gamma, ep.mu
    ixy_u, iuz, ixy = (float(v) for v in _info_triple(j.mass))
    terms = {
        "div_y_given_xzu": -ep.alpha * divergence_y(j, ch.w1),
        "div_z_given_xyu": -ep.beta * divergence_z(j, ch.w2),
        "div_y_given_xu": -g * mu * divergence_y_given_xu(j, ch.w1),
        "div_y_given_x": -(1 - g) * divergence_y_given_x(j, ch.w1),
        "info_xy_given_u": g * mu * ixy_u,
        "info_uz": g * (1 - mu) * iuz,
        "info_xy": (1 - g) * ixy,
    }
    with np.errstate(invalid="ignore"):
        short = sum(v for k, v in terms.items() if k != "div_y_given_x")
    exact = omega_slope_at_zero(j, ch, ep)
    return SlopeDecomposition(exact, terms, short, exact - short)


@dataclass(frozen=True)
class ConvexityReport:
    lambdas: np.ndarray
    values: np.ndarray
    second_differences: np.ndarray
    curvature: np.ndarray
    violations: list
    passed: bool


def convexity_check(q, ch: ChannelPair, ep: ExponentParams, lambda_grid, tol: float = 1e-9) -> ConvexityReport:
    """Second differences of ``lam -> Omega(q, lam)`` on a (possibly uneven) grid.

    For grid points ``l0 < l1 < l2`` with gaps ``h1, h2`` the reported difference is
    ``2 (h1 f2 - (h1 + h2) f1 + h2 f0) / (h1 + h2)``, which reduces to
    ``f2 - 2 f1 + f0`` on an even grid and is nonnegative for convex ``f``.
    """
    lams = np.sort(np.asarray(lambda_grid, float))
    if lams.size < 5:
        raise ValueError("convexity check needs at least 5 lambda values")
    vals = np.array([omega_functional(q, ch, ep.with_lam(float(l))) for l in lams])
    h1 = np.diff(lams)[:-1]
    h2 = np.diff(lams)[1:]
    d2 = 2 * (h1 * vals[2:] - (h1 + h2) * vals[1:-1] + h2 * vals[:-2]) / (h1 + h2)
    curv = np.array([omega_curvature(q, ch, ep.with_lam(float(l))) for l in lams])
    bad = [(float(lams[i + 1]), float(d2[i])) for i in range(d2.size) if d2[i] < -tol]
    return ConvexityReport(lams, vals, d2, curv, bad, not bad)


# ---------------------------------------------------------------------------
# boundedness of the moment functional
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _upper_sets(trivial_axes: tuple[str, ...]) -> np.ndarray:
    """Indicator rows (over :data:`MARGINALS`) of the upward-closed families of
    nonempty coordinate subsets that can vanish together.

    A coordinate with a one-letter alphabet never changes a marginal, so a
    family must contain ``S`` exactly when it contains ``S`` without it.
    """
    subsets = [frozenset(c) for r in range(1, 5) for c in itertools.combinations(AXES, r)]
    index = {s: i for i, s in enumerate(subsets)}
    supers = [[index[t] for t in subsets if s < t] for s in subsets]
    rows = []
    for mask in range(1, 1 << len(subsets)):
        members = [i for i in range(len(subsets)) if mask >> i & 1]
        if any(not (mask >> j & 1) for i in members for j in supers[i]):
            continue
        ok = True
        for i in members:
            s = subsets[i]
            for c in trivial_axes:
                t = s - {c}
                if t != s and (not t or not (mask >> index[t] & 1)):
                    ok = False
        if not ok:
            continue
        rows.append([1.0 if mask >> index[frozenset(k)] & 1 else 0.0 for k in MARGINALS])
    return np.array(rows)


def omega_is_bounded(ep: ExponentParams, shape: tuple[int, int, int, int]) -> bool:
    """Whether ``sup_q Omega(q)`` is finite.

    Near a face where the marginals in an upward-closed family vanish like
    ``eps``, a surviving term of the moment sum scales like
    ``eps^(1 + lam * sum of their coefficients)``; the supremum is infinite
    exactly when one such exponent is negative.
    """
    trivial = tuple(a for a, n in zip(AXES, shape) if n == 1)
    fam = _upper_sets(trivial)
    c = omega_coefficients(ep.alpha, ep.beta, ep.gamma, ep.mu)
    cv = np.array([float(c[k]) for k in MARGINALS])
    expo = fam[:, 0] + ep.lam * (fam @ cv)
    return bool(np.all(expo >= -1e-12))


# ---------------------------------------------------------------------------
# maximization over q
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OmegaResult:
    """Best moment-functional value found over test joints.

    ``certified`` marks results that include the lattice enumeration pass; it is
    a stronger search, not a proof of global optimality. ``bounded`` is False
    when the supremum is infinite, in which case ``value`` is ``inf``.
    """

    value: float
    argmax_q: JointDistUXYZ
    certified: bool
    bounded: bool = True
    params: ExponentParams | None = None


def _lattice(n_atoms: int, resolution: int) -> np.ndarray:
    """All points of the simplex with coordinates in ``{0, 1/N, ..., 1}``."""
    n = resolution
    out = []
    for bars in itertools.combinations(range(n + n_atoms - 1), n_atoms - 1):
        b = np.diff(np.concatenate([[-1], bars, [n + n_atoms - 1]])) - 1
        out.append(b)
    return np.array(out, float) / n


def lattice_size(n_atoms: int, resolution: int) -> int:
    return math.comb(resolution + n_atoms - 1, n_atoms - 1)


def _lift(r: np.ndarray, ch: ChannelPair, nu: int) -> np.ndarray:
    q = np.zeros((nu, ch.nx, ch.ny, ch.nz))
    q[: r.shape[0]] = structured_joint(r, ch)
    return q


def omega_max_batch(
    ch: ChannelPair,
    params: list[ExponentParams],
    budget: OptimizerBudget = OptimizerBudget(starts=32),
    nu: int | None = None,
    extra_starts: list[np.ndarray] | None = None,
    lattice_resolution: int | None = None,
    max_lattice_points: int = 200_000,
) -> list[OmegaResult]:
    """Maximize the moment functional for several parameter tuples at once.

    Every tuple starts from the same set of joints: the uniform joint, the
    caller's ``extra_starts`` (typically structured optima and earlier argmaxes)
    and low-discrepancy points, up to ``budget.starts`` in total. With
    ``lattice_resolution`` set, every lattice point is scored first and the best
    ones join the starts.
    """
    nu = nu or test_aux_size(ch.ny, ch.nz)
    shape = (nu, ch.nx, ch.ny, ch.nz)
    d = int(np.prod(shape))
    results: list[OmegaResult | None] = [None] * len(params)
    live_idx = []
    for i, ep in enumerate(params):
        if not omega_is_bounded(ep, shape):
            uni = np.full(shape, 1.0 / d)
            results[i] = OmegaResult(float("inf"), JointDistUXYZ(uni), lattice_resolution is not None, False, ep)
        elif ep.lam == 0:
            uni = np.full(shape, 1.0 / d)
            results[i] = OmegaResult(0.0, JointDistUXYZ(uni), True, True, ep)
        else:
            live_idx.append(i)
    if not live_idx:
        return results  # type: ignore[return-value]
    live = [params[i] for i in live_idx]
    tilt = _Tilt(ch, live, nu)
    k = len(live)

    base = [np.full(d, 1.0 / d)]
    for q in extra_starts or []:
        q = np.asarray(q, float).reshape(-1)
        if q.size == d and q.sum() > 0:
            base.append(q / q.sum())
            base.append(0.9 * base[-1] + 0.1 / d)
    n_sobol = max(budget.starts - len(base), 0)
    base.extend(sobol_simplex(n_sobol, d, budget.seed + 7))
    base = np.array(base)
    per_row = [base] * k

    if lattice_resolution is not None:
        n_pts = lattice_size(d, lattice_resolution)
        if n_pts > max_lattice_points:
            raise ValueError(f"lattice of {n_pts} points exceeds the cap of {max_lattice_points}")
        lat = _lattice(d, lattice_resolution)
        per_row = []
        for j in range(k):
            vals = np.concatenate(
                [
                    tilt.value(lat[s : s + 4096].reshape((-1,) + shape), np.full(min(4096, len(lat) - s), j))
                    for s in range(0, len(lat), 4096)
                ]
            )
            top = np.argsort(-vals, kind="stable")[:8]
            per_row.append(np.concatenate([base, lat[top]]))

    s = per_row[0].shape[0]
    x0 = np.concatenate(per_row)
    row_param = np.repeat(np.arange(k), s)
    res = ascend(
        lambda x, ids: tilt.value_and_grad(x, row_param[ids]),
        x0,
        budget.max_iter,
        budget.tol,
        ftol=budget.ftol,
        groups=row_param,
    )
    vals = np.where(np.isfinite(res.value), res.value, -np.inf).reshape(k, s)
    best = np.argmax(vals, axis=1)
    for j, i in enumerate(live_idx):
        q = res.x[j * s + best[j]].reshape(shape)
        results[i] = OmegaResult(
            float(vals[j, best[j]]), JointDistUXYZ(q / q.sum()), lattice_resolution is not None, True, params[i]
        )
    return results  # type: ignore[return-value]


def omega_max(
    ch: ChannelPair,
    ep: ExponentParams,
    budget: OptimizerBudget = OptimizerBudget(starts=32),
    nu: int | None = None,
    extra_starts: list[np.ndarray] | None = None,
    lattice_resolution: int | None = None,
) -> OmegaResult:
    """Best ``Omega(q)`` over test joints with ``|U| = |Y| + |Z| - 1`` unless overridden.

    The structured optimum of the matching hyperplane problem is always among
    the starts, which keeps the result at or above ``lam`` times the hyperplane
    value.
    """
    nu = nu or test_aux_size(ch.ny, ch.nz)
    _, rs, _ = hyperplane_values(ch, [ep.hyperplane], OptimizerBudget(seed=budget.seed), nu=min(nu, ch.nx))
    starts = [_lift(rs[0], ch, nu)] + list(extra_starts or [])
    return omega_max_batch(ch, [ep], budget, nu, starts, lattice_resolution)[0]


def exponent_at_params(r1: float, r2: float, ep: ExponentParams, omega: OmegaResult) -> float:
    """The exponent ratio at one parameter tuple (may be negative, ``-inf`` if unbounded)."""
    if omega.params is not None and omega.params != ep:
        raise ValueError("omega was computed for different parameters")
    if not omega.bounded or not np.isfinite(omega.value):
        return float("-inf")
    a1, a2 = ep.rate_coefficients
    return (ep.lam * (a1 * r1 + a2 * r2) - omega.value) / ep.denominator


# ---------------------------------------------------------------------------
# outer search
# ---------------------------------------------------------------------------

def log2_grid(lo: int, hi: int, step: int) -> tuple[float, ...]:
    return tuple(float(2.0**e) for e in range(lo, hi + 1, step))


@dataclass(frozen=True)
class ExponentSearch:
    """Outer search over the five parameters.

    ``alphas``, ``betas`` and ``lambdas`` are log-grids; ``grid`` is the
    ``(gamma, mu)`` sweep shared with the region computation. Only the
    ``top_k`` normals whose halfplanes the rate pair violates most are searched,
    followed by ``refine_rounds`` rounds of local coordinate moves.
    """

    alphas: tuple[float, ...] = log2_grid(-6, 6, 2)
    betas: tuple[float, ...] = log2_grid(-6, 6, 2)
    lambdas: tuple[float, ...] = log2_grid(-10, 4, 2)
    grid: tuple[int, int] = (65, 33)
    top_k: int = 3
    refine_rounds: int = 3
    chunk: int = 24
    budget: OptimizerBudget = field(default_factory=lambda: OptimizerBudget(starts=32, max_iter=1000))
    seed: int = 0


class ExponentEngine:
    """Evaluates the converse exponent for one channel at many rate pairs.

    Moment-functional maxima depend only on the parameters, so they are cached
    across rate pairs, and every argmax joins a shared pool of starts.
    """

    def __init__(self, ch: ChannelPair, search: ExponentSearch = ExponentSearch(), region: RegionBoundary | None = None):
        self.ch = ch
        self.search = search
        self.nu = test_aux_size(ch.ny, ch.nz)
        self.shape = (self.nu, ch.nx, ch.ny, ch.nz)
        budget = OptimizerBudget(seed=search.seed)
        if region is None or not region.params:
            params = hyperplane_grid(*search.grid)
            vals, rs, _ = hyperplane_values(ch, params, budget)
        else:
            params, vals, rs = region.params, region.values, region.argmax
        self.hp = list(params)
        self.hp_values = np.asarray(vals, float)
        self.hp_argmax = np.asarray(rs)
        self.coef = np.array([p.rate_coefficients for p in self.hp])
        self._hp_index = {(p.gamma, p.mu): i for i, p in enumerate(self.hp)}
        self._extra_hp: dict[tuple[float, float], tuple[float, np.ndarray]] = {}
        self.cache: dict[tuple, OmegaResult] = {}
        self.pool: list[np.ndarray] = []

    # -- helpers -----------------------------------------------------------
    def _hyperplane(self, gamma: float, mu: float) -> tuple[float, np.ndarray]:
        i = self._hp_index.get((gamma, mu))
        if i is not None:
            return float(self.hp_values[i]), self.hp_argmax[i]
        if (gamma, mu) not in self._extra_hp:
            v, r, _ = hyperplane_values(self.ch, [HyperplaneParams(gamma, mu)], OptimizerBudget(seed=self.search.seed))
            self._extra_hp[(gamma, mu)] = (float(v[0]), r[0])
        return self._extra_hp[(gamma, mu)]

    def omega(self, params: list[ExponentParams]) -> list[OmegaResult]:
        """Cached batched maximization; structured optima and pooled argmaxes seed each run."""
        todo = [p for p in dict.fromkeys(params) if p.key() not in self.cache]
        for s in range(0, len(todo), self.search.chunk):
            chunk = todo[s : s + self.search.chunk]
            starts = []
            for hp in dict.fromkeys(p.hyperplane for p in chunk):
                starts.append(_lift(self._hyperplane(hp.gamma, hp.mu)[1], self.ch, self.nu))
            starts.extend(self.pool[-8:])
            for r in omega_max_batch(self.ch, chunk, self.search.budget, self.nu, starts):
                self.cache[r.params.key()] = r  # type: ignore[union-attr]
                if r.bounded:
                    self._remember(r.argmax_q.mass)
        return [self.cache[p.key()] for p in params]

    def _remember(self, q: np.ndarray):
        for old in self.pool:
            if np.max(np.abs(old - q)) < 1e-6:
                return
        self.pool.append(np.array(q))

    def _lower_bounds(self, params: list[ExponentParams]) -> np.ndarray:
        """Cheap lower bounds on the maximum: ``lam`` times the hyperplane value
        (Jensen at the structured optimum) and the value at every pooled joint."""
        lb = np.array([p.lam * self._hyperplane(p.gamma, p.mu)[0] for p in params])
        if self.pool and params:
            tilt = _Tilt(self.ch, params, self.nu)
            ids = np.arange(len(params))
            for q in self.pool:
                v = tilt.value(np.broadcast_to(q, (len(params),) + self.shape), ids)
                lb = np.maximum(lb, v)
        return lb

    def _grid_params(self, gamma: float, mu: float) -> list[ExponentParams]:
        s = self.search
        out = []
        for a in s.alphas:
            for b in s.betas:
                for lam in s.lambdas:
                    ep = ExponentParams(a, b, gamma, mu, lam)
                    if omega_is_bounded(ep, self.shape):
                        out.append(ep)
        return out

    def _best_of(self, r1, r2, params: list[ExponentParams], best: tuple[float, ExponentParams | None]):
        if not params:
            return best
        s_vals = np.array([p.lam * (np.dot(p.rate_coefficients, (r1, r2))) for p in params])
        den = np.array([p.denominator for p in params])
        ub = (s_vals - self._lower_bounds(params)) / den
        order = sorted(range(len(params)), key=lambda i: (-ub[i], params[i].key()))
        pos = 0
        while pos < len(order):
            if ub[order[pos]] <= max(best[0], 0.0) + 1e-12:
                break
            chunk = [params[i] for i in order[pos : pos + self.search.chunk]]
            for ep, om in zip(chunk, self.omega(chunk)):
                f = exponent_at_params(r1, r2, ep, om)
                if f > best[0] + 1e-15 or (f == best[0] and best[1] is not None and ep.key() < best[1].key()):
                    best = (f, ep)
            pos += self.search.chunk
        return best

    def _neighbours(self, ep: ExponentParams, factor: float, dg: float, dm: float) -> list[ExponentParams]:
        out = []
        for name in ("alpha", "beta", "lam"):
            for f in (factor, 1.0 / factor):
                d = ep.to_dict()
                d["lambda" if name == "lam" else name] *= f
                out.append(ExponentParams(d["alpha"], d["beta"], d["gamma"], d["mu"], d["lambda"]))
        for g in (ep.gamma - dg, ep.gamma + dg):
            if 0.0 <= g <= 1.0:
                out.append(ExponentParams(ep.alpha, ep.beta, g, ep.mu, ep.lam))
        for m in (ep.mu - dm, ep.mu + dm):
            if 0.0 <= m <= 0.5:
                out.append(ExponentParams(ep.alpha, ep.beta, ep.gamma, m, ep.lam))
        return [p for p in out if omega_is_bounded(p, self.shape)]

    # -- public ------------------------------------------------------------
    def violations(self, r1: float, r2: float) -> np.ndarray:
        return self.coef @ np.array([r1, r2]) - self.hp_values

    def value(self, r1: float, r2: float) -> tuple[float, ExponentParams | None]:
        """``max(0, sup F)`` over the search and the parameters attaining it.

        When the rate pair satisfies every computed halfplane, each parameter
        tuple on the grid has a nonpositive exponent (the moment maximum is at
        least ``lam`` times the hyperplane value), so 0 is returned directly.
        """
        if r1 < 0 or r2 < 0:
            raise ValueError("rates must be nonnegative")
        v = self.violations(r1, r2)
        if not np.any(v > 1e-12):
            return 0.0, None
        cand = sorted(np.flatnonzero(v > 1e-12), key=lambda i: (-v[i], i))[: self.search.top_k]
        best: tuple[float, ExponentParams | None] = (float("-inf"), None)
        for i in cand:
            best = self._best_of(r1, r2, self._grid_params(self.hp[i].gamma, self.hp[i].mu), best)
        if best[1] is None or best[0] <= 0:
            return 0.0, best[1]
        factor = 2.0
        dg = 1.0 / (2 * max(self.search.grid[0] - 1, 1))
        dm = 0.5 / (2 * max(self.search.grid[1] - 1, 1))
        for _ in range(self.search.refine_rounds):
            centre = best[1]
            best = self._best_of(r1, r2, self._neighbours(centre, math.sqrt(factor), dg, dm), best)
            if best[1] == centre:
                factor = math.sqrt(factor)
                dg /= 2
                dm /= 2
        return max(best[0], 0.0), best[1]


def exponent(
    r1: float, r2: float, ch: ChannelPair, search: ExponentSearch = ExponentSearch()
) -> tuple[float, ExponentParams | None]:
    """Converse exponent at one rate pair. Use :class:`ExponentEngine` for many pairs."""
    return ExponentEngine(ch, search).value(r1, r2)

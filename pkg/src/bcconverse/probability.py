"""Exact finite-alphabet probability primitives.

All logarithms are natural, so every quantity is in nats. The conventions
``0 ln 0 = 0`` and ``0 ln(0/0) = 0`` are used throughout.

Joint laws of ``(U, X, Y, Z)`` are stored as 4-d arrays with axis order
``u, x, y, z``. The helpers prefixed with an underscore accept extra leading
batch axes; the optimizers in :mod:`bcconverse.region` and
:mod:`bcconverse.exponent` rely on that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

SUM_TOL = 1e-12
RENORMALIZE_TOL = 1e-9

AXES = "uxyz"


class ValidationError(ValueError):
    """Raised when an input is not a valid probability object."""


def _check_weights(w: np.ndarray, what: str) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValidationError(f"{what}: non-finite entry")
    if np.any(w < 0):
        idx = tuple(int(i) for i in np.argwhere(w < 0)[0])
        raise ValidationError(f"{what}: negative entry at index {idx}")
    total = w.sum()
    if abs(total - 1.0) > RENORMALIZE_TOL:
        raise ValidationError(f"{what}: weights sum to {total!r}, not 1")
    return w / total


@dataclass(frozen=True)
class ProbDist:
    """A probability vector over a finite alphabet."""

    mass: np.ndarray

    def __post_init__(self):
        m = _check_weights(np.ravel(self.mass), "ProbDist")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def size(self) -> int:
        return self.mass.size

    @classmethod
    def uniform(cls, k: int) -> "ProbDist":
        return cls(np.full(k, 1.0 / k))


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic matrix; row ``x`` is the output law given input ``x``."""

    rows: np.ndarray

    def __post_init__(self):
        r = np.array(self.rows, dtype=float)
        if r.ndim != 2 or r.shape[0] == 0 or r.shape[1] == 0:
            raise ValidationError(f"StochasticMatrix: expected a nonempty 2-d array, got shape {r.shape}")
        for i in range(r.shape[0]):
            try:
                r[i] = _check_weights(r[i], f"row {i}")
            except ValidationError as exc:
                raise ValidationError(f"StochasticMatrix: {exc}") from None
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    @property
    def in_size(self) -> int:
        return self.rows.shape[0]

    @property
    def out_size(self) -> int:
        return self.rows.shape[1]

    def row(self, i: int) -> ProbDist:
        return ProbDist(self.rows[i])


@dataclass(frozen=True)
class JointDistUXYZ:
    """Joint law of ``(U, X, Y, Z)`` as a 4-d array indexed ``[u, x, y, z]``."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.ndim != 4:
            raise ValidationError(f"JointDistUXYZ: expected a 4-d array, got shape {m.shape}")
        m = _check_weights(m, "JointDistUXYZ")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.mass.shape  # type: ignore[return-value]

    def marginal(self, keep: str) -> np.ndarray:
        """Marginal over the named axes, e.g. ``"xy"``, in ``uxyz`` order."""
        return _marginal(self.mass, keep, keepdims=False)


# ---------------------------------------------------------------------------
# array-level helpers (batched over leading axes)
# ---------------------------------------------------------------------------

def _xlogx(p: np.ndarray) -> np.ndarray:
    safe = np.where(p > 0, p, 1.0)
    return np.where(p > 0, p * np.log(safe), 0.0)


def _safe_log(p: np.ndarray) -> np.ndarray:
    """``ln p`` where ``p > 0`` and 0 elsewhere (the value is always multiplied by 0 there)."""
    return np.log(np.where(p > 0, p, 1.0))


def _marginal(q: np.ndarray, keep: str, keepdims: bool = True) -> np.ndarray:
    """Sum a ``(..., U, X, Y, Z)`` array over the axes not named in ``keep``."""
    drop = tuple(q.ndim - 4 + i for i, a in enumerate(AXES) if a not in keep)
    if not drop:
        return q
    return q.sum(axis=drop, keepdims=keepdims)


def _entropy_of(q: np.ndarray, keep: str) -> np.ndarray:
    m = _marginal(q, keep, keepdims=False)
    k = len(keep)
    return -_xlogx(m).reshape(m.shape[: m.ndim - k] + (-1,)).sum(axis=-1)


def _info_triple(q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(I(X;Y|U), I(U;Z), I(X;Y))`` for a batch of joints."""
    h = {s: _entropy_of(q, s) for s in ("u", "ux", "uy", "uxy", "z", "uz", "x", "y", "xy")}
    i_xy_u = h["ux"] + h["uy"] - h["uxy"] - h["u"]
    i_uz = h["u"] + h["z"] - h["uz"]
    i_xy = h["x"] + h["y"] - h["xy"]
    return i_xy_u, i_uz, i_xy


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def entropy(p: ProbDist | np.ndarray) -> float:
    """Shannon entropy in nats."""
    m = p.mass if isinstance(p, ProbDist) else ProbDist(p).mass
    return float(-_xlogx(m).sum())


def mutual_information(joint: np.ndarray) -> float:
    """``I(A;B)`` of a 2-d joint table, summed over its support."""
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2:
        raise ValidationError(f"mutual_information: expected a 2-d table, got shape {j.shape}")
    j = _check_weights(j, "joint")
    pa = j.sum(axis=1, keepdims=True)
    pb = j.sum(axis=0, keepdims=True)
    denom = pa * pb
    ratio = np.where(j > 0, j / np.where(denom > 0, denom, 1.0), 1.0)
    return float(np.sum(np.where(j > 0, j * np.log(ratio), 0.0)))


InfoSelector = Literal["I(X;Y|U)", "I(U;Z)", "I(X;Y)"]


def conditional_mutual_information(joint: JointDistUXYZ, which: InfoSelector) -> float:
    """One of the three information functionals that define the capacity region."""
    i_xy_u, i_uz, i_xy = _info_triple(joint.mass)
    table = {"I(X;Y|U)": i_xy_u, "I(U;Z)": i_uz, "I(X;Y)": i_xy}
    try:
        return float(table[which])
    except KeyError:
        raise ValueError(f"unknown selector {which!r}; expected one of {sorted(table)}") from None


def conditional_kl(q_cond: np.ndarray, ref: StochasticMatrix, weight: np.ndarray, x_of: np.ndarray) -> float:
    """Conditional divergence ``sum_c weight(c) D(q_cond(.|c) || ref(.|x_of[c]))``.

    ``q_cond`` has shape ``(C, out)``; ``weight`` and ``x_of`` have shape ``(C,)``.
    Returns ``inf`` when ``q_cond`` puts weighted mass where ``ref`` is zero.
    """
    q = np.asarray(q_cond, dtype=float)
    w = np.asarray(weight, dtype=float)
    r = ref.rows[np.asarray(x_of, dtype=int)]
    mass = w[:, None] * q
    live = mass > 0
    if np.any(live & (r <= 0)):
        return float("inf")
    ratio = np.where(live, q / np.where(r > 0, r, 1.0), 1.0)
    return float(max(np.sum(np.where(live, mass * np.log(ratio), 0.0)), 0.0))


def _conditional_over(q: np.ndarray, target: str) -> tuple[np.ndarray, np.ndarray]:
    """Conditional of axis ``target`` given the remaining three, flattened to ``(C, |target|)``."""
    axis = AXES.index(target)
    qt = np.moveaxis(q, axis, -1)
    w = qt.sum(axis=-1)
    cond = np.divide(qt, w[..., None], out=np.zeros_like(qt), where=w[..., None] > 0)
    return cond.reshape(-1, qt.shape[-1]), w.reshape(-1)


def divergence_y(joint: JointDistUXYZ, w1: StochasticMatrix) -> float:
    """``D(q_{Y|XZU} || W1 | q_{XZU})``."""
    cond, w = _conditional_over(joint.mass, "y")
    nu, nx, _, nz = joint.shape
    x_of = np.broadcast_to(np.arange(nx)[None, :, None], (nu, nx, nz)).reshape(-1)
    return conditional_kl(cond, w1, w, x_of)


def divergence_z(joint: JointDistUXYZ, w2: StochasticMatrix) -> float:
    """``D(q_{Z|XYU} || W2 | q_{XYU})``."""
    cond, w = _conditional_over(joint.mass, "z")
    nu, nx, ny, _ = joint.shape
    x_of = np.broadcast_to(np.arange(nx)[None, :, None], (nu, nx, ny)).reshape(-1)
    return conditional_kl(cond, w2, w, x_of)


def divergence_y_given_xu(joint: JointDistUXYZ, w1: StochasticMatrix) -> float:
    """``D(q_{Y|XU} || W1 | q_{XU})``."""
    qux_y = joint.marginal("uxy")
    nu, nx, ny = qux_y.shape
    w = qux_y.sum(axis=-1)
    cond = np.divide(qux_y, w[..., None], out=np.zeros_like(qux_y), where=w[..., None] > 0)
    x_of = np.broadcast_to(np.arange(nx)[None, :], (nu, nx)).reshape(-1)
    return conditional_kl(cond.reshape(-1, ny), w1, w.reshape(-1), x_of)


def divergence_y_given_x(joint: JointDistUXYZ, w1: StochasticMatrix) -> float:
    """``D(q_{Y|X} || W1 | q_X)``."""
    qxy = joint.marginal("xy")
    w = qxy.sum(axis=-1)
    cond = np.divide(qxy, w[:, None], out=np.zeros_like(qxy), where=w[:, None] > 0)
    return conditional_kl(cond, w1, w, np.arange(qxy.shape[0]))

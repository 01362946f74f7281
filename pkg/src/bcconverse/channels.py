"""Channel pairs ``(W1, W2)`` and the structured joints they induce.

A broadcast channel whose transition law factors as ``W1(y|x) W2(z|x)`` is
described by the two component matrices. Channel specs are JSON documents::

    {"X": 2, "Y": 2, "Z": 2, "W1": [[...], [...]], "W2": [[...], [...]]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .probability import (
    JointDistUXYZ,
    ProbDist,
    StochasticMatrix,
    ValidationError,
)

# Row-sum tolerance for channel-spec files. It is looser than the in-memory
# constructor tolerance so that rows printed with six or seven decimals load.
SPEC_ROW_TOL = 1e-6


# Cardinality bound for the supporting-hyperplane maximization (P_sh).
def region_aux_size(nx: int, ny: int, nz: int) -> int:
    return min(nx, ny + nz - 1)


# Cardinality bound quoted for the original region description. It is looser
# than the one above and kept only for sensitivity runs.
def legacy_aux_size(nx: int, ny: int, nz: int) -> int:
    return min(nx, ny + nz) + 1


# Cardinality bound for the unconstrained test joints q.
def test_aux_size(ny: int, nz: int) -> int:
    return ny + nz - 1


class ChannelSpecError(ValidationError):
    """Malformed channel-spec document."""


@dataclass(frozen=True)
class ChannelPair:
    w1: StochasticMatrix
    w2: StochasticMatrix

    def __post_init__(self):
        if self.w1.in_size != self.w2.in_size:
            raise ValidationError(
                f"W1 has {self.w1.in_size} input symbols but W2 has {self.w2.in_size}"
            )

    @property
    def nx(self) -> int:
        return self.w1.in_size

    @property
    def ny(self) -> int:
        return self.w1.out_size

    @property
    def nz(self) -> int:
        return self.w2.out_size

    @classmethod
    def from_arrays(cls, w1, w2) -> "ChannelPair":
        return cls(StochasticMatrix(np.asarray(w1, float)), StochasticMatrix(np.asarray(w2, float)))

    def to_dict(self) -> dict:
        return {
            "X": self.nx,
            "Y": self.ny,
            "Z": self.nz,
            "W1": self.w1.rows.tolist(),
            "W2": self.w2.rows.tolist(),
        }


@dataclass(frozen=True)
class AuxInputLaw:
    """``(p_U, p_{X|U})``: the free part of a structured joint."""

    p_u: ProbDist
    p_x_given_u: StochasticMatrix

    def __post_init__(self):
        if self.p_u.size != self.p_x_given_u.in_size:
            raise ValidationError(
                f"p_U has {self.p_u.size} symbols but p_X|U has {self.p_x_given_u.in_size} rows"
            )

    @property
    def nu(self) -> int:
        return self.p_u.size

    @classmethod
    def from_joint_ux(cls, r: np.ndarray) -> "AuxInputLaw":
        """Split a joint ``r[u, x]`` into ``p_U`` and ``p_{X|U}``; empty rows become uniform."""
        r = np.asarray(r, float)
        r = np.clip(r, 0.0, None)
        r = r / r.sum()
        pu = r.sum(axis=1)
        cond = np.full_like(r, 1.0 / r.shape[1])
        live = pu > 0
        cond[live] = r[live] / pu[live, None]
        return cls(ProbDist(pu), StochasticMatrix(cond))

    def joint_ux(self) -> np.ndarray:
        return self.p_u.mass[:, None] * self.p_x_given_u.rows


def _read_matrix(doc: dict, key: str, rows: int, cols: int) -> np.ndarray:
    raw = doc[key]
    if not isinstance(raw, list) or len(raw) != rows:
        got = len(raw) if isinstance(raw, list) else type(raw).__name__
        raise ChannelSpecError(f"{key}: expected {rows} rows, got {got}")
    out = np.empty((rows, cols))
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != cols:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise ChannelSpecError(f"{key} row {i}: expected {cols} columns, got {got}")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ChannelSpecError(f"{key}[{i}][{j}]: not a number ({v!r})")
            if not np.isfinite(v):
                raise ChannelSpecError(f"{key}[{i}][{j}]: not finite")
            if v < 0:
                raise ChannelSpecError(f"{key}[{i}][{j}]: negative entry {v!r}")
            out[i, j] = v
        total = out[i].sum()
        if abs(total - 1.0) > SPEC_ROW_TOL:
            raise ChannelSpecError(f"{key} row {i}: sums to {total!r}, not 1")
        out[i] /= total
    return out


def parse_channel_spec(text: str) -> ChannelPair:
    """Parse and validate a channel-spec JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChannelSpecError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ChannelSpecError("top level must be a JSON object")
    expected = {"X", "Y", "Z", "W1", "W2"}
    if set(doc) != expected:
        missing = sorted(expected - set(doc))
        extra = sorted(set(doc) - expected)
        raise ChannelSpecError(f"keys must be exactly {sorted(expected)} (missing {missing}, unexpected {extra})")
    sizes = {}
    for k in ("X", "Y", "Z"):
        v = doc[k]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ChannelSpecError(f"{k}: expected a positive integer, got {v!r}")
        sizes[k] = v
    w1 = _read_matrix(doc, "W1", sizes["X"], sizes["Y"])
    w2 = _read_matrix(doc, "W2", sizes["X"], sizes["Z"])
    return ChannelPair(StochasticMatrix(w1), StochasticMatrix(w2))


def load_channel(path: str | Path) -> ChannelPair:
    return parse_channel_spec(Path(path).read_text(encoding="utf-8"))


def joint_from_aux(aux: AuxInputLaw, ch: ChannelPair) -> JointDistUXYZ:
    """``p(u,x,y,z) = p_U(u) p_{X|U}(x|u) W1(y|x) W2(z|x)``."""
    if aux.p_x_given_u.out_size != ch.nx:
        raise ValidationError(
            f"p_X|U has {aux.p_x_given_u.out_size} input symbols, channel has {ch.nx}"
        )
    return JointDistUXYZ(structured_joint(aux.joint_ux(), ch))


def structured_joint(r: np.ndarray, ch: ChannelPair) -> np.ndarray:
    """Batched version of :func:`joint_from_aux` on raw ``r[..., u, x]`` arrays."""
    w1 = ch.w1.rows
    w2 = ch.w2.rows
    return r[..., :, :, None, None] * w1[:, :, None] * w2[:, None, :]


# A few channels used in tests, examples and the acceptance suite.

def bsc(eps: float) -> np.ndarray:
    return np.array([[1 - eps, eps], [eps, 1 - eps]])


def identity(k: int = 2) -> np.ndarray:
    return np.eye(k)


def useless(k_in: int = 2, k_out: int = 2) -> np.ndarray:
    return np.full((k_in, k_out), 1.0 / k_out)

"""Exact verification of correct-probability bounds on tiny block codes.

Sequences in ``A^n`` are indexed lexicographically with the first letter most
significant, which matches ``np.kron`` ordering of the product channel
``W^n = W (x) ... (x) W``. Messages ``(k, l)`` are flattened as ``m = k*L + l``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelPair
from .exponent import ExponentParams, OmegaResult, exponent_at_params
from .probability import ValidationError

ENUMERATION_BUDGET = 2**22
EXHAUSTIVE_DEC2_LIMIT = 4096
SLACK_TOL = 1e-12
# Inclusive slack for the log-ratio conditions of the information-spectrum event,
# so that ratios equal to a threshold up to rounding count as satisfied.
LOG_EVENT_TOL = 1e-12


class EnumerationBudgetExceeded(RuntimeError):
    def __init__(self, terms: int, budget: int):
        super().__init__(f"exact enumeration needs {terms} terms, budget is {budget}")
        self.terms = terms
        self.budget = budget


def power_channel(w: np.ndarray, n: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(out, w)
    return out


def sequence_index(seq, alphabet: int) -> int:
    idx = 0
    for s in seq:
        idx = idx * alphabet + int(s)
    return idx


def index_sequence(idx: int, alphabet: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        idx, r = divmod(idx, alphabet)
        out.append(r)
    return tuple(reversed(out))


@dataclass(frozen=True)
class BlockCode:
    """Encoder and decoders for blocklength ``n`` with ``K`` private and ``L`` common messages.

    ``encoder`` is either an int array ``(K, L, n)`` of input letters or a
    float array ``(K, L, |X|^n)`` of input-sequence probabilities. ``dec1``
    maps each ``y^n`` index to a flat message ``k*L + l``; ``dec2`` maps each
    ``z^n`` index to ``l``.
    """

    n: int
    K: int
    L: int
    encoder: np.ndarray
    dec1: np.ndarray
    dec2: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.K < 1 or self.L < 1:
            raise ValidationError("n, K and L must be positive")
        enc = np.asarray(self.encoder)
        if enc.ndim != 3 or enc.shape[:2] != (self.K, self.L):
            raise ValidationError(f"encoder must have shape (K, L, ...) = ({self.K}, {self.L}, ...), got {enc.shape}")
        if enc.dtype.kind in "iu" and enc.shape[2] != self.n:
            raise ValidationError(f"deterministic encoder words must have length n={self.n}")
        d1 = np.asarray(self.dec1, dtype=int)
        d2 = np.asarray(self.dec2, dtype=int)
        if d1.ndim != 1 or np.any(d1 < 0) or np.any(d1 >= self.K * self.L):
            raise ValidationError("dec1 must map every y^n to a message index in [0, K*L)")
        if d2.ndim != 1 or np.any(d2 < 0) or np.any(d2 >= self.L):
            raise ValidationError("dec2 must map every z^n to a common-message index in [0, L)")
        for name, v in (("encoder", enc), ("dec1", d1), ("dec2", d2)):
            v = np.array(v)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def deterministic(self) -> bool:
        return self.encoder.dtype.kind in "iu"

    @property
    def rates(self) -> tuple[float, float]:
        return math.log(self.K) / self.n, math.log(self.L) / self.n

    def encoder_matrix(self, nx: int) -> np.ndarray:
        """``phi[m, x^n]`` with ``m = k*L + l``."""
        m = self.K * self.L
        if self.deterministic:
            if np.any(self.encoder < 0) or np.any(self.encoder >= nx):
                raise ValidationError(f"encoder letters must lie in [0, {nx})")
            out = np.zeros((m, nx**self.n))
            words = self.encoder.reshape(m, self.n)
            idx = np.zeros(m, dtype=int)
            for t in range(self.n):
                idx = idx * nx + words[:, t]
            out[np.arange(m), idx] = 1.0
            return out
        phi = np.asarray(self.encoder, float).reshape(m, -1)
        if phi.shape[1] != nx**self.n:
            raise ValidationError(f"stochastic encoder rows need {nx**self.n} entries, got {phi.shape[1]}")
        if np.any(phi < 0) or np.any(np.abs(phi.sum(axis=1) - 1) > 1e-9):
            raise ValidationError("stochastic encoder rows must be probability vectors")
        return phi

    def check_channel(self, ch: ChannelPair):
        if self.dec1.size != ch.ny**self.n:
            raise ValidationError(f"dec1 has {self.dec1.size} entries, expected {ch.ny ** self.n}")
        if self.dec2.size != ch.nz**self.n:
            raise ValidationError(f"dec2 has {self.dec2.size} entries, expected {ch.nz ** self.n}")

    def with_decoders(self, dec1, dec2) -> "BlockCode":
        return BlockCode(self.n, self.K, self.L, self.encoder, np.asarray(dec1), np.asarray(dec2))

    def enumeration_terms(self, ch: ChannelPair) -> int:
        phi = self.encoder_matrix(ch.nx)
        return int(np.count_nonzero(phi)) * ch.ny**self.n * ch.nz**self.n

    def to_dict(self) -> dict:
        d = {"n": self.n, "K": self.K, "L": self.L}
        if self.deterministic:
            d["encoder"] = self.encoder.reshape(self.K * self.L, self.n).tolist()
        else:
            d["encoder_probs"] = self.encoder.reshape(self.K * self.L, -1).tolist()
        d["dec1"] = [[int(m // self.L), int(m % self.L)] for m in self.dec1]
        d["dec2"] = self.dec2.tolist()
        return d


def _require_budget(code: BlockCode, ch: ChannelPair, budget: int):
    terms = code.enumeration_terms(ch)
    if terms > budget:
        raise EnumerationBudgetExceeded(terms, budget)


# ---------------------------------------------------------------------------
# batched core: many encoders sharing (n, K, L) and a channel
# ---------------------------------------------------------------------------

class _CodeBatch:
    def __init__(self, phi: np.ndarray, ch: ChannelPair, n: int, L: int):
        self.phi = phi  # (C, M, Xn)
        self.w1n = power_channel(ch.w1.rows, n)
        self.w2n = power_channel(ch.w2.rows, n)
        self.L = L
        self.M = phi.shape[1]
        self.l_of = np.arange(self.M) % L

    def success1(self, dec1):  # (C, Xn, M): W1^n(D1(m) | x)
        onehot = (dec1[:, :, None] == np.arange(self.M)).astype(float)
        return np.einsum("xy,cym->cxm", self.w1n, onehot)

    def success2(self, dec2):  # (C, Xn, L): W2^n(D2(l) | x)
        onehot = (dec2[:, :, None] == np.arange(self.L)).astype(float)
        return np.einsum("xz,czl->cxl", self.w2n, onehot)

    def p_c(self, dec1, dec2):
        a1 = self.success1(dec1)
        a2 = self.success2(dec2)[:, :, self.l_of]
        return np.einsum("cmx,cxm,cxm->c", self.phi, a1, a2) / self.M

    @staticmethod
    def _argmax_keep(score, current):
        best = score.max(axis=-1, keepdims=True)
        cur = np.take_along_axis(score, current[..., None], axis=-1)
        keep = cur >= best - 1e-12 * np.maximum(np.abs(best), 1e-300)
        first = np.argmax(score >= best - 1e-12 * np.maximum(np.abs(best), 1e-300), axis=-1)
        return np.where(keep[..., 0], current, first)

    def improve1(self, dec1, dec2):
        a2 = self.success2(dec2)[:, :, self.l_of]  # (C, Xn, M)
        b = np.einsum("cmx,cxm->cxm", self.phi, a2)
        score = np.einsum("xy,cxm->cym", self.w1n, b)
        return self._argmax_keep(score, dec1)

    def improve2(self, dec1, dec2):
        a1 = self.success1(dec1)
        c = np.einsum("cmx,cxm->cxm", self.phi, a1)
        cl = np.zeros(c.shape[:2] + (self.L,))
        for l in range(self.L):
            cl[:, :, l] = c[:, :, self.l_of == l].sum(axis=2)
        score = np.einsum("xz,cxl->czl", self.w2n, cl)
        return self._argmax_keep(score, dec2)

    def map_decoders(self):
        c = self.phi.shape[0]
        s1 = np.einsum("xy,cmx->cym", self.w1n, self.phi)
        s2m = np.einsum("xz,cmx->czm", self.w2n, self.phi)
        s2 = np.zeros(s2m.shape[:2] + (self.L,))
        for l in range(self.L):
            s2[:, :, l] = s2m[:, :, self.l_of == l].sum(axis=2)
        return np.argmax(s1, axis=2), np.argmax(s2, axis=2).reshape(c, -1)

    def exhaustive(self, nz_seq: int):
        """Best receiver-1 response to every receiver-2 decoder; exact optimum."""
        c = self.phi.shape[0]
        best_pc = np.full(c, -np.inf)
        best1 = np.zeros((c, self.w1n.shape[1]), dtype=int)
        best2 = np.zeros((c, nz_seq), dtype=int)
        for idx in range(self.L**nz_seq):
            d2 = np.array(np.unravel_index(idx, (self.L,) * nz_seq)).reshape(1, -1)
            d2 = np.broadcast_to(d2, (c, nz_seq))
            d1 = self.improve1(np.zeros((c, self.w1n.shape[1]), dtype=int), d2)
            pc = self.p_c(d1, d2)
            better = pc > best_pc + 1e-15
            best_pc = np.where(better, pc, best_pc)
            best1[better] = d1[better]
            best2[better] = d2[better]
        return best1, best2, best_pc

    def optimize(self, dec1, dec2, rounds: int):
        pc = self.p_c(dec1, dec2)
        for _ in range(rounds):
            new1 = self.improve1(dec1, dec2)
            pc1 = self.p_c(new1, dec2)
            if np.any(pc1 < pc - 1e-12):
                raise AssertionError("decoder update decreased the correct probability")
            new2 = self.improve2(new1, dec2)
            pc2 = self.p_c(new1, new2)
            if np.any(pc2 < pc1 - 1e-12):
                raise AssertionError("decoder update decreased the correct probability")
            done = np.array_equal(new1, dec1) and np.array_equal(new2, dec2)
            dec1, dec2, pc = new1, new2, pc2
            if done:
                break
        return dec1, dec2, pc


def exact_correct_probability(code: BlockCode, ch: ChannelPair, budget: int = ENUMERATION_BUDGET) -> float:
    """``(1/KL) sum_{k,l} sum_x phi(x|k,l) W1^n(D1(k,l)|x) W2^n(D2(l)|x)``."""
    code.check_channel(ch)
    _require_budget(code, ch, budget)
    b = _CodeBatch(code.encoder_matrix(ch.nx)[None], ch, code.n, code.L)
    return float(b.p_c(code.dec1[None], code.dec2[None])[0])


@dataclass(frozen=True)
class ErrorProbabilities:
    p_c: float
    p_e: float
    p_e1: float
    p_e2: float


def error_probabilities(code: BlockCode, ch: ChannelPair, budget: int = ENUMERATION_BUDGET) -> ErrorProbabilities:
    """Correct and error probabilities from one full enumeration over ``(m, x^n, y^n, z^n)``.

    ``p_c`` and ``p_e`` are summed over complementary events separately, so
    ``p_c + p_e = 1`` is a genuine check rather than an identity.
    """
    code.check_channel(ch)
    _require_budget(code, ch, budget)
    phi = code.encoder_matrix(ch.nx)
    w1n = power_channel(ch.w1.rows, code.n)
    w2n = power_channel(ch.w2.rows, code.n)
    m_count = code.K * code.L
    ms = np.arange(m_count)
    ok1 = code.dec1[None, :] == ms[:, None]  # (M, Yn)
    ok2 = code.dec2[None, :] == (ms % code.L)[:, None]  # (M, Zn)
    joint = phi[:, :, None, None] * w1n[None, :, :, None] * w2n[None, :, None, :]  # (M, Xn, Yn, Zn)
    both = ok1[:, None, :, None] & ok2[:, None, None, :]
    p_c = float(np.sum(np.where(both, joint, 0.0)) / m_count)
    p_e = float(np.sum(np.where(~both, joint, 0.0)) / m_count)
    p_e1 = float(np.sum(np.where(~ok1[:, None, :, None], joint, 0.0)) / m_count)
    p_e2 = float(np.sum(np.where(~ok2[:, None, None, :], joint, 0.0)) / m_count)
    return ErrorProbabilities(p_c, p_e, p_e1, p_e2)


def map_decoders(code_or_encoder, ch: ChannelPair, n: int | None = None, K: int | None = None, L: int | None = None):
    """Per-receiver maximum-likelihood decoders (ties to the lowest index)."""
    if isinstance(code_or_encoder, BlockCode):
        code = code_or_encoder
    else:
        enc = np.asarray(code_or_encoder)
        code = BlockCode(n, K, L, enc, np.zeros(ch.ny**n, int), np.zeros(ch.nz**n, int))
    b = _CodeBatch(code.encoder_matrix(ch.nx)[None], ch, code.n, code.L)
    d1, d2 = b.map_decoders()
    return code.with_decoders(d1[0], d2[0])


def optimize_decoders(code: BlockCode, ch: ChannelPair, rounds: int = 50, budget: int = ENUMERATION_BUDGET) -> BlockCode:
    """Alternating best response of the two decoders.

    Each half-round replaces one decoder by its best response to the other;
    ties keep the current decision, otherwise go to the lowest index. The
    correct probability never decreases, and the loop stops at a fixed point.
    Alternation can stall at a local optimum, so when there are at most
    ``EXHAUSTIVE_DEC2_LIMIT`` receiver-2 decoders, each one is also paired with
    its receiver-1 best response and the overall best pair is returned.
    """
    code.check_channel(ch)
    _require_budget(code, ch, budget)
    b = _CodeBatch(code.encoder_matrix(ch.nx)[None], ch, code.n, code.L)
    d1, d2, pc = b.optimize(code.dec1[None], code.dec2[None], rounds)
    zn = ch.nz**code.n
    if code.L**zn <= EXHAUSTIVE_DEC2_LIMIT:
        e1, e2, epc = b.exhaustive(zn)
        if epc[0] > pc[0] + 1e-15:
            d1, d2 = e1, e2
    return code.with_decoders(d1[0], d2[0])


def all_deterministic_encoders(n: int, K: int, L: int, nx: int) -> np.ndarray:
    """Every map from ``K*L`` messages to ``X^n`` as one-hot ``phi`` arrays ``(C, KL, |X|^n)``."""
    m = K * L
    xn = nx**n
    words = np.array(np.unravel_index(np.arange(xn**m), (xn,) * m)).T  # (C, M)
    phi = np.zeros((words.shape[0], m, xn))
    phi[np.arange(words.shape[0])[:, None], np.arange(m)[None, :], words] = 1.0
    return phi


def best_correct_probabilities(
    phi: np.ndarray, ch: ChannelPair, n: int, L: int, rounds: int = 50
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Optimized-decoder correct probabilities for a batch of encoders.

    Exact (every receiver-2 decoder with its receiver-1 best response) when
    there are at most ``EXHAUSTIVE_DEC2_LIMIT`` receiver-2 decoders; otherwise
    the better of two alternating runs from ML-based starts.
    """
    b = _CodeBatch(phi, ch, n, L)
    zn = ch.nz**n
    if L**zn <= EXHAUSTIVE_DEC2_LIMIT:
        d1, d2, pc = b.exhaustive(zn)
        return pc, d1, d2
    d1, d2 = b.map_decoders()
    r1 = b.optimize(d1, d2, rounds)
    d1b = b.improve1(d1, d2)
    d2b = b.improve2(d1b, d2)
    r2 = b.optimize(d1b, d2b, rounds)
    pick = r2[2] > r1[2]
    dec1 = np.where(pick[:, None], r2[0], r1[0])
    dec2 = np.where(pick[:, None], r2[1], r1[1])
    return np.maximum(r1[2], r2[2]), dec1, dec2


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    kind: str
    p_c: float
    bound: float
    slack: float
    params: dict
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "p_c": self.p_c,
            "bound": self.bound,
            "slack": self.slack,
            "params": self.params,
            "pass": self.passed,
            **({"details": self.details} if self.details else {}),
        }


def theorem_bound(n: int, rates: tuple[float, float], ep: ExponentParams, omega: OmegaResult, f_scale: float = 1.0):
    """``6 exp(-n F)`` with ``F`` the exponent ratio at ``ep`` (scaled by ``f_scale``)."""
    f = exponent_at_params(rates[0], rates[1], ep, omega) * f_scale
    with np.errstate(over="ignore"):
        return float(6.0 * np.exp(-n * f)), float(f)


def check_theorem3_bound(
    code: BlockCode,
    ch: ChannelPair,
    ep: ExponentParams,
    omega: OmegaResult,
    f_scale: float = 1.0,
    require_certified: bool = True,
    tol: float = SLACK_TOL,
) -> BoundReport:
    """Check ``P_c <= 6 exp(-n F(params))`` at the code's own rates.

    ``f_scale`` multiplies the exponent before the check; values above 1
    deliberately corrupt the bound (used to exercise the failure path).
    """
    if require_certified and not omega.certified:
        raise ValueError("moment maximum was not computed in lattice mode; pass require_certified=False to accept it")
    p_c = exact_correct_probability(code, ch)
    bound, f = theorem_bound(code.n, code.rates, ep, omega, f_scale)
    slack = bound - p_c
    return BoundReport(
        "exponential",
        p_c,
        bound,
        slack,
        {**ep.to_dict(), "omega": omega.value},
        bool(slack >= -tol),
        {"exponent": f, "rates": list(code.rates), "certified": omega.certified},
    )


@dataclass(frozen=True)
class TestLaws:
    """The five auxiliary laws of the information-spectrum bound.

    Shapes (each normalized over its last axis):
    ``y_given_xzl (L, Xn, Zn, Yn)``, ``z_given_xyl (L, Xn, Yn, Zn)``,
    ``y_given_l (L, Yn)``, ``z (Zn,)``, ``y (Yn,)``.
    """

    __test__ = False  # not a pytest class

    y_given_xzl: np.ndarray
    z_given_xyl: np.ndarray
    y_given_l: np.ndarray
    z: np.ndarray
    y: np.ndarray

    def validate(self, code: BlockCode, ch: ChannelPair):
        L, xn, yn, zn = code.L, ch.nx**code.n, ch.ny**code.n, ch.nz**code.n
        want = {
            "y_given_xzl": (L, xn, zn, yn),
            "z_given_xyl": (L, xn, yn, zn),
            "y_given_l": (L, yn),
            "z": (zn,),
            "y": (yn,),
        }
        for name, shape in want.items():
            a = np.asarray(getattr(self, name), float)
            if a.shape != shape:
                raise ValidationError(f"test law {name}: expected shape {shape}, got {a.shape}")
            if np.any(a < 0) or np.any(np.abs(a.sum(axis=-1) - 1) > 1e-9):
                raise ValidationError(f"test law {name}: rows must be probability vectors")


def _code_joint(code: BlockCode, ch: ChannelPair) -> np.ndarray:
    """``p(l, x^n, y^n, z^n)`` for uniform messages."""
    phi = code.encoder_matrix(ch.nx).reshape(code.K, code.L, -1)
    p_lx = phi.sum(axis=0) / (code.K * code.L)
    w1n = power_channel(ch.w1.rows, code.n)
    w2n = power_channel(ch.w2.rows, code.n)
    return p_lx[:, :, None, None] * w1n[None, :, :, None] * w2n[None, :, None, :]


def _normalize_last(a: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    s = a.sum(axis=-1, keepdims=True)
    return np.where(s > 0, a / np.where(s > 0, s, 1.0), fallback)


def induced_test_laws(code: BlockCode, ch: ChannelPair) -> TestLaws:
    """The code's own conditionals; undefined rows fall back to the channel or uniform."""
    p = _code_joint(code, ch)
    L, xn, yn, zn = p.shape
    w1n = power_channel(ch.w1.rows, code.n)
    w2n = power_channel(ch.w2.rows, code.n)
    q1 = _normalize_last(np.moveaxis(p, 2, 3), np.broadcast_to(w1n[None, :, None, :], (L, xn, zn, yn)))
    q2 = _normalize_last(p, np.broadcast_to(w2n[None, :, None, :], (L, xn, yn, zn)))
    q3 = _normalize_last(p.sum(axis=(1, 3)), np.full((L, yn), 1.0 / yn))
    q4 = p.sum(axis=(0, 1, 2))
    q5 = p.sum(axis=(0, 1, 3))
    return TestLaws(q1, q2, q3, q4, q5)


def random_test_laws(code: BlockCode, ch: ChannelPair, rng: np.random.Generator) -> TestLaws:
    L, xn, yn, zn = code.L, ch.nx**code.n, ch.ny**code.n, ch.nz**code.n
    return TestLaws(
        rng.dirichlet(np.ones(yn), size=(L, xn, zn)),
        rng.dirichlet(np.ones(zn), size=(L, xn, yn)),
        rng.dirichlet(np.ones(yn), size=L),
        rng.dirichlet(np.ones(zn)),
        rng.dirichlet(np.ones(yn)),
    )


def _log(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def spectrum_event_probability(code: BlockCode, ch: ChannelPair, laws: TestLaws, eta: float) -> float:
    """Probability under the code's joint law that all five likelihood-ratio conditions hold."""
    p = _code_joint(code, ch)
    n = code.n
    w1n = power_channel(ch.w1.rows, n)
    w2n = power_channel(ch.w2.rows, n)
    lw1 = _log(w1n)[None, :, :, None]  # (1, Xn, Yn, 1)
    lw2 = _log(w2n)[None, :, None, :]  # (1, Xn, 1, Zn)
    p_zl = p.sum(axis=(1, 2))
    p_z_given_l = _normalize_last(p_zl, np.zeros_like(p_zl))
    ne = n * eta
    tol = LOG_EVENT_TOL
    with np.errstate(invalid="ignore"):
        c1 = lw1 - _log(np.moveaxis(laws.y_given_xzl, 3, 2)) >= -ne - tol
        c2 = lw2 - _log(laws.z_given_xyl) >= -ne - tol
        c3 = lw1 - _log(laws.y_given_l)[:, None, :, None] >= math.log(code.K) - ne - tol
        c4 = _log(p_z_given_l)[:, None, None, :] - _log(laws.z)[None, None, None, :] >= math.log(code.L) - ne - tol
        c5 = lw1 - _log(laws.y)[None, None, :, None] >= math.log(code.K * code.L) - ne - tol
    event = c1 & c2 & c3 & c4 & c5
    return float(np.sum(np.where(event & (p > 0), p, 0.0)))


def check_lemma1_bound(
    code: BlockCode, ch: ChannelPair, laws: TestLaws, eta: float, budget: int = ENUMERATION_BUDGET
) -> BoundReport:
    """Check ``P_c <= P{five conditions} + 5 exp(-n eta)`` by full enumeration."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    laws.validate(code, ch)
    p_c = exact_correct_probability(code, ch, budget)
    event = spectrum_event_probability(code, ch, laws, eta)
    bound = event + 5.0 * math.exp(-code.n * eta)
    slack = bound - p_c
    return BoundReport(
        "spectrum",
        p_c,
        bound,
        slack,
        {"eta": eta},
        bool(slack >= -SLACK_TOL),
        {"event_probability": event, "rates": list(code.rates)},
    )


# ---------------------------------------------------------------------------
# code-spec documents
# ---------------------------------------------------------------------------

def code_from_dict(doc: dict, ch: ChannelPair) -> BlockCode:
    """Build a code from its JSON form; missing decoders become optimized ML decoders."""
    for k in ("n", "K", "L"):
        v = doc.get(k)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ValidationError(f"code spec: {k} must be a positive integer, got {v!r}")
    n, K, L = doc["n"], doc["K"], doc["L"]
    if "encoder" in doc:
        enc = np.asarray(doc["encoder"])
        if enc.shape != (K * L, n) or enc.dtype.kind not in "iu":
            raise ValidationError(f"code spec: encoder must be {K * L} rows of {n} integer letters")
        enc = enc.reshape(K, L, n)
    elif "encoder_probs" in doc:
        enc = np.asarray(doc["encoder_probs"], float)
        if enc.ndim != 2 or enc.shape[0] != K * L:
            raise ValidationError(f"code spec: encoder_probs must have {K * L} rows")
        enc = enc.reshape(K, L, -1)
    else:
        raise ValidationError("code spec: needs 'encoder' or 'encoder_probs'")
    yn, zn = ch.ny**n, ch.nz**n
    if "dec1" in doc:
        d1 = np.asarray(doc["dec1"], dtype=int)
        if d1.shape != (yn, 2):
            raise ValidationError(f"code spec: dec1 must list {yn} (k, l) pairs")
        if np.any(d1[:, 0] >= K) or np.any(d1[:, 1] >= L) or np.any(d1 < 0):
            raise ValidationError("code spec: dec1 message out of range")
        dec1 = d1[:, 0] * L + d1[:, 1]
    else:
        dec1 = None
    dec2 = np.asarray(doc["dec2"], dtype=int) if "dec2" in doc else None
    if dec2 is not None and dec2.shape != (zn,):
        raise ValidationError(f"code spec: dec2 must list {zn} common-message indices")
    code = BlockCode(n, K, L, enc, dec1 if dec1 is not None else np.zeros(yn, int), dec2 if dec2 is not None else np.zeros(zn, int))
    code.encoder_matrix(ch.nx)
    if dec1 is None or dec2 is None:
        ml = map_decoders(code, ch)
        code = code.with_decoders(ml.dec1 if dec1 is None else dec1, ml.dec2 if dec2 is None else dec2)
    return code


def load_codes(text: str, ch: ChannelPair) -> list[dict]:
    """Parse a JSON code spec or list of specs into raw dicts (validated later per code)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"code spec is not valid JSON: {exc}") from None
    docs = doc if isinstance(doc, list) else [doc]
    if not docs or not all(isinstance(d, dict) for d in docs):
        raise ValidationError("code spec must be an object or a nonempty list of objects")
    return docs

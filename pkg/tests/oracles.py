"""Independent brute-force transcriptions used as test oracles.

Everything here is written with plain Python loops over explicit index
tuples, deliberately sharing no code with the package.
"""

import itertools
import math

import numpy as np


def h(p):
    return -sum(v * math.log(v) for v in np.ravel(p) if v > 0)


def marginal(q, keep):
    """Sum a (U, X, Y, Z) table down to the named axes with explicit loops."""
    axes = "uxyz"
    shape = tuple(q.shape[axes.index(a)] for a in keep)
    out = np.zeros(shape)
    for idx in itertools.product(*(range(n) for n in q.shape)):
        out[tuple(idx[axes.index(a)] for a in keep)] += q[idx]
    return out


def info_triple(q):
    """(I(X;Y|U), I(U;Z), I(X;Y)) from entropies of loop-built marginals."""
    H = {k: h(marginal(q, k)) for k in ("u", "ux", "uy", "uxy", "z", "uz", "x", "y", "xy")}
    return (
        H["ux"] + H["uy"] - H["uxy"] - H["u"],
        H["u"] + H["z"] - H["uz"],
        H["x"] + H["y"] - H["xy"],
    )


def structured(pu, px_u, w1, w2):
    nu, nx = px_u.shape
    ny, nz = w1.shape[1], w2.shape[1]
    q = np.zeros((nu, nx, ny, nz))
    for u, x, y, z in itertools.product(range(nu), range(nx), range(ny), range(nz)):
        q[u, x, y, z] = pu[u] * px_u[u, x] * w1[x, y] * w2[x, z]
    return q


def omega_point(q, w1, w2, a, b, g, m, pt):
    """Tilted weight at one outcome, written as conditional log-ratios."""
    u, x, y, z = pt
    q_uxz = marginal(q, "uxz")
    q_uxy = marginal(q, "uxy")
    q_uy = marginal(q, "uy")
    q_u = marginal(q, "u")
    q_uz = marginal(q, "uz")
    q_z = marginal(q, "z")
    q_y = marginal(q, "y")
    y_given_xzu = q[pt] / q_uxz[u, x, z]
    z_given_xyu = q[pt] / q_uxy[u, x, y]
    y_given_u = q_uy[u, y] / q_u[u]
    z_given_u = q_uz[u, z] / q_u[u]
    return (
        a * math.log(w1[x, y] / y_given_xzu)
        + b * math.log(w2[x, z] / z_given_xyu)
        + g * (m * math.log(w1[x, y] / y_given_u) + (1 - m) * math.log(z_given_u / q_z[z]))
        + (1 - g) * math.log(w1[x, y] / q_y[y])
    )


def omega_sum(q, w1, w2, a, b, g, m, lam):
    """ln sum q exp(lam omega) with math.fsum accumulation (no shift)."""
    terms = []
    for pt in itertools.product(*(range(n) for n in q.shape)):
        if q[pt] > 0:
            terms.append(q[pt] * math.exp(lam * omega_point(q, w1, w2, a, b, g, m, pt)))
    return math.log(math.fsum(terms))


def bsc_capacity(eps):
    return math.log(2) + eps * math.log(eps) + (1 - eps) * math.log(1 - eps)


def correct_probability(n, K, L, words, dec1, dec2, w1, w2):
    """(1/KL) sum over messages and all channel outputs, with sequences as tuples."""
    nx, ny = w1.shape
    nz = w2.shape[1]
    total = 0.0
    for k in range(K):
        for l in range(L):
            xs = words[k * L + l]
            for ys in itertools.product(range(ny), repeat=n):
                yi = 0
                for s in ys:
                    yi = yi * ny + s
                if dec1[yi] != (k, l):
                    continue
                p1 = math.prod(w1[xs[t], ys[t]] for t in range(n))
                for zs in itertools.product(range(nz), repeat=n):
                    zi = 0
                    for s in zs:
                        zi = zi * nz + s
                    if dec2[zi] != l:
                        continue
                    total += p1 * math.prod(w2[xs[t], zs[t]] for t in range(n))
    return total / (K * L)


def spectrum_event(n, K, L, words, w1, w2, laws, eta):
    """Probability of the five log-ratio conditions, one (l, x, y, z) tuple at a time.

    ``laws`` holds callables: q1(y|x,z,l), q2(z|x,y,l), q3(y|l), q4(z), q5(y)
    on sequence tuples. Messages are uniform and the encoder deterministic.
    """
    nx, ny = w1.shape
    nz = w2.shape[1]
    seqs_x = list(itertools.product(range(nx), repeat=n))
    seqs_y = list(itertools.product(range(ny), repeat=n))
    seqs_z = list(itertools.product(range(nz), repeat=n))

    def p_lxyz(l, xs, ys, zs):
        hits = sum(1 for k in range(K) if tuple(words[k * L + l]) == xs)
        if hits == 0:
            return 0.0
        w = math.prod(w1[xs[t], ys[t]] * w2[xs[t], zs[t]] for t in range(n))
        return hits * w / (K * L)

    def p_z_given_l(zs, l):
        num = sum(p_lxyz(l, xs, ys, zs) for xs in seqs_x for ys in seqs_y)
        den = sum(p_lxyz(l, xs, ys, z2) for xs in seqs_x for ys in seqs_y for z2 in seqs_z)
        return num / den

    q1, q2, q3, q4, q5 = laws
    slack = n * eta
    total = 0.0
    for l in range(L):
        for xs in seqs_x:
            for ys in seqs_y:
                for zs in seqs_z:
                    p = p_lxyz(l, xs, ys, zs)
                    if p == 0.0:
                        continue
                    a1 = math.prod(w1[xs[t], ys[t]] for t in range(n))
                    a2 = math.prod(w2[xs[t], zs[t]] for t in range(n))

                    def ge(num, den, thr):
                        if den == 0.0:
                            return True
                        if num == 0.0:
                            return False
                        return math.log(num / den) >= thr - 1e-12

                    ok = (
                        ge(a1, q1(ys, xs, zs, l), -slack)
                        and ge(a2, q2(zs, xs, ys, l), -slack)
                        and ge(a1, q3(ys, l), math.log(K) - slack)
                        and ge(p_z_given_l(zs, l), q4(zs), math.log(L) - slack)
                        and ge(a1, q5(ys), math.log(K * L) - slack)
                    )
                    if ok:
                        total += p
    return total

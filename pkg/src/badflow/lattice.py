"""LLL reduction and Fincke-Pohst enumeration for small real lattices.

Bases are sequences of row vectors.  The routines only use Python arithmetic
on the entries, so the same code runs on floats or on mpmath numbers when a
skewed lattice needs more than double precision.
"""

from __future__ import annotations

import math

import mpmath

from . import exact
from .errors import DegenerateLattice

DELTA = 0.99


def _nint(x) -> int:
    if isinstance(x, mpmath.mpf):
        return int(mpmath.nint(x))
    return int(round(x))


def _sqrt(x):
    if isinstance(x, mpmath.mpf):
        return mpmath.sqrt(x)
    return math.sqrt(x)


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def gram_schmidt(B):
    """Return (mu, bsq): GS coefficients and squared GS norms of the rows."""
    d = len(B)
    Bs = []
    mu = [[0] * d for _ in range(d)]
    bsq = []
    for i in range(d):
        v = list(B[i])
        for j in range(i):
            mu[i][j] = _dot(B[i], Bs[j]) / bsq[j]
            v = [a - mu[i][j] * b for a, b in zip(v, Bs[j])]
        Bs.append(v)
        bsq.append(_dot(v, v))
        if not bsq[-1] > 0:
            raise DegenerateLattice(f"basis vector {i} is dependent on the previous ones")
    return mu, bsq


def lll_reduce(basis, delta: float = DELTA, max_iter: int = 100_000):
    """LLL-reduce ``basis`` (rows).

    Returns ``(reduced, U)`` with ``reduced = U @ basis`` and ``U`` an integer
    matrix of determinant +-1.
    """
    B = [list(row) for row in basis]
    d = len(B)
    U = [[int(i == j) for j in range(d)] for i in range(d)]
    if d == 0:
        return B, U
    mu, bsq = gram_schmidt(B)
    k = 1
    it = 0
    while k < d:
        it += 1
        if it > max_iter:
            raise RuntimeError("LLL did not converge")
        # size reduction, repeated because float mu drifts after large steps
        for _ in range(8):
            changed = False
            for j in range(k - 1, -1, -1):
                q = _nint(mu[k][j])
                if q:
                    changed = True
                    B[k] = [a - q * b for a, b in zip(B[k], B[j])]
                    U[k] = [a - q * b for a, b in zip(U[k], U[j])]
                    for i in range(j):
                        mu[k][i] -= q * mu[j][i]
                    mu[k][j] -= q
            if not changed:
                break
            mu, bsq = gram_schmidt(B)
        if bsq[k] >= (delta - mu[k][k - 1] ** 2) * bsq[k - 1]:
            k += 1
        else:
            B[k], B[k - 1] = B[k - 1], B[k]
            U[k], U[k - 1] = U[k - 1], U[k]
            mu, bsq = gram_schmidt(B)
            k = max(k - 1, 1)
    return B, U


def is_unimodular(U) -> bool:
    return abs(exact.det(U)) == 1


def enumerate_short(B, radius_sq, max_count: int = 200_000, slack: float = 1e-9):
    """All nonzero integer x with ||x @ B||^2 <= radius_sq (relative slack).

    ``B`` should already be reduced; the search is a plain depth-first
    Fincke-Pohst traversal over the Gram-Schmidt data.
    """
    mu, bsq = gram_schmidt(B)
    mu = [[float(x) for x in row] for row in mu]
    bsq = [float(x) for x in bsq]
    d = len(B)
    R2 = float(radius_sq) * (1 + slack)
    x = [0] * d
    out = []

    def rec(i, partial):
        c = -sum(mu[j][i] * x[j] for j in range(i + 1, d))
        rem = R2 - partial
        if rem < 0:
            return
        w = math.sqrt(rem / bsq[i])
        lo, hi = math.ceil(c - w), math.floor(c + w)
        for xi in range(lo, hi + 1):
            x[i] = xi
            p = partial + bsq[i] * (xi - c) ** 2
            if p > R2:
                continue
            if i == 0:
                if any(x):
                    out.append(tuple(x))
                    if len(out) > max_count:
                        raise OverflowError("too many lattice points in the search region")
            else:
                rec(i - 1, p)
        x[i] = 0

    rec(d - 1, 0.0)
    return out


def shortest_enum(B):
    """Exact shortest nonzero vector of the lattice spanned by reduced rows B.

    Returns (coeffs relative to B, squared length as float).
    """
    mu, bsq = gram_schmidt(B)
    mu = [[float(v) for v in row] for row in mu]
    bsq = [float(v) for v in bsq]
    d = len(B)
    best = [float(_dot(B[0], B[0])), tuple(int(i == 0) for i in range(d))]
    x = [0] * d

    def rec(i, partial):
        c = -sum(mu[j][i] * x[j] for j in range(i + 1, d))
        rem = best[0] * (1 + 1e-12) - partial
        if rem < 0:
            return
        w = math.sqrt(rem / bsq[i])
        lo, hi = math.ceil(c - w), math.floor(c + w)
        # zig-zag from the centre so good vectors are found early
        cands = sorted(range(lo, hi + 1), key=lambda t: abs(t - c))
        for xi in cands:
            x[i] = xi
            p = partial + bsq[i] * (xi - c) ** 2
            if p > best[0] * (1 + 1e-12):
                continue
            if i == 0:
                if any(x) and p < best[0]:
                    best[0], best[1] = p, tuple(x)
            else:
                rec(i - 1, p)
        x[i] = 0

    rec(d - 1, 0.0)
    return best[1], best[0]


def combine(coeffs, B):
    """The lattice vector sum_i coeffs[i] * B[i]."""
    dim = len(B[0])
    return [sum(c * B[i][k] for i, c in enumerate(coeffs) if c) for k in range(dim)]


def norm_sq(v):
    return _dot(v, v)

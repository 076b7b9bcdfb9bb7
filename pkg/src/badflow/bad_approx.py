"""Weighted approximation quality, obstruction boxes and the game constants.

Sign conventions: ``quality(z, p, q)`` measures ``|sigma(q) z_sigma + sigma(p)|``
so it vanishes at ``z = -p/q``, while the obstruction box ``Delta_eps(p, q)`` is
centred at ``+p/q``.  Hence ``z in Delta_eps(p, q)`` exactly when
``quality(z, -p, q) <= eps`` (for admissible q).  The union over all p is
symmetric, so Bad_eps does not depend on the choice.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import lattice
from .errors import NoClass, NotAdmissible, ZeroElement
from .number_field import (
    AlgebraicInt,
    NumberField,
    WeightVector,
    embed,
    embed_many,
    embed_mp,
    enumerate_bounded_coords,
    height,
    in_OK_r_eps,
    warn_if_vacuous,
    weighted_norm_from_embedding,
    weighted_norms,
)


def diagonal(z) -> np.ndarray:
    """The conjugate-diagonal vector (z, conj z) used for quadratic fields."""
    z = complex(z)
    return np.array([z, z.conjugate()])


def _as_vector(z, n):
    v = np.asarray(z, dtype=np.complex128).reshape(-1)
    if v.shape != (n,):
        raise ValueError(f"expected a complex vector of length {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


# -- quality ------------------------------------------------------------------------

def quality_from_embeddings(r: WeightVector, z, p_emb, q_emb, q_norm=None) -> float:
    if q_norm is None:
        q_norm = weighted_norm_from_embedding(r, q_emb)
    val = 0.0
    for i in r.sigma_plus:
        val = max(val, q_norm ** r.r[i] * abs(q_emb[i] * z[i] + p_emb[i]))
    for i in r.sigma_zero:
        val = max(val, abs(q_emb[i] * z[i] + p_emb[i]), abs(q_emb[i]))
    return float(val)


def quality(K: NumberField, r: WeightVector, z, p: AlgebraicInt, q: AlgebraicInt) -> float:
    """Weighted approximation quality of z by the ratio -p/q."""
    if not q:
        raise ZeroElement("q must be nonzero")
    z = _as_vector(z, K.n)
    return quality_from_embeddings(r, z, embed(K, p), embed(K, q))


def quality_mp(K, r, z, p, q, dps=None):
    """High-precision variant of :func:`quality`; ``z`` may hold mpmath values."""
    dps = dps or K.precision
    with mpmath.workdps(dps):
        pe, qe = embed_mp(K, p, dps), embed_mp(K, q, dps)
        z = [mpmath.mpc(v) for v in z]
        nrm = max(abs(qe[i]) ** (mpmath.mpf(1) / _mpw(r, i)) for i in r.sigma_plus)
        val = mpmath.mpf(0)
        for i in r.sigma_plus:
            val = max(val, nrm ** _mpw(r, i) * abs(qe[i] * z[i] + pe[i]))
        for i in r.sigma_zero:
            val = max(val, abs(qe[i] * z[i] + pe[i]), abs(qe[i]))
        return val


def _mpw(r, i):
    if r.exact is not None:
        return mpmath.mpf(r.exact[i].numerator) / r.exact[i].denominator
    return mpmath.mpf(r.r[i])


def _batch_quality(r, z, p_emb, q_emb, q_norms):
    """quality for arrays: p_emb (N, C, n) candidates per q, q_emb (N, n)."""
    resid = np.abs(q_emb[:, None, :] * z[None, None, :] + p_emb)
    val = np.zeros(resid.shape[:2])
    for i in r.sigma_plus:
        val = np.maximum(val, (q_norms ** r.r[i])[:, None] * resid[:, :, i])
    for i in r.sigma_zero:
        val = np.maximum(val, np.maximum(resid[:, :, i], np.abs(q_emb[:, i])[:, None]))
    return val


# -- nearest p ----------------------------------------------------------------------

def _realify(w):
    w = np.asarray(w)
    out = np.empty(w.shape[:-1] + (2 * w.shape[-1],))
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out


def _roundoff(K, targets):
    """Round-off solution of Theta(p) ~= targets for rows of targets."""
    return np.rint(_realify(targets) @ K.real_pinv.T).astype(np.int64)


def best_p(K: NumberField, z, q: AlgebraicInt, r: WeightVector | None = None,
           search: int = 0) -> AlgebraicInt:
    """An approximate minimiser p of max_sigma |sigma(q) z_sigma + sigma(p)|.

    The round-off point on Theta(O_K) is refined by an exhaustive search over
    the coordinate box of half-width ``search`` around it; with ``r`` given
    the refinement minimises the weighted quality instead.
    """
    if not q:
        raise ZeroElement("q must be nonzero")
    z = _as_vector(z, K.n)
    qe = embed(K, q)
    p0 = _roundoff(K, -(qe * z))
    best, best_val = p0, None
    for off in itertools.product(range(-search, search + 1), repeat=K.n):
        cand = p0 + np.array(off)
        pe = K.embedding_matrix @ cand.astype(float)
        if r is None:
            val = float(np.max(np.abs(qe * z + pe)))
        else:
            val = quality_from_embeddings(r, z, pe, qe)
        if best_val is None or val < best_val:
            best, best_val = cand, val
    return K.element(best)


@dataclass(frozen=True)
class BestApproximation:
    value: float
    p: AlgebraicInt | None
    q: AlgebraicInt | None


def bad_constant_report(K: NumberField, r: WeightVector, z, Qmax: float,
                        search: int = 1) -> BestApproximation:
    """Minimum quality over q with max|sigma(q)| <= Qmax, with its witness."""
    warn_if_vacuous(K, r)
    z = _as_vector(z, K.n)
    Q = enumerate_bounded_coords(K, Qmax)
    if len(Q) == 0:
        return BestApproximation(math.inf, None, None)
    q_emb = embed_many(K, Q)
    q_norms = weighted_norms(r, q_emb)
    P0 = _roundoff(K, -(q_emb * z[None, :]))
    offsets = np.array(list(itertools.product(range(-search, search + 1), repeat=K.n)))
    cands = P0[:, None, :] + offsets[None, :, :]
    p_emb = cands.astype(float) @ K.embedding_matrix.T
    vals = _batch_quality(r, z, p_emb, q_emb, q_norms)
    flat = int(np.argmin(vals))
    i, j = divmod(flat, vals.shape[1])
    return BestApproximation(float(vals[i, j]), K.element(cands[i, j]), K.element(Q[i]))


def bad_constant_up_to_height(K: NumberField, r: WeightVector, z, Qmax: float) -> float:
    return bad_constant_report(K, r, z, Qmax).value


# -- obstruction boxes ------------------------------------------------------------

@dataclass(frozen=True)
class DeltaBox:
    p: AlgebraicInt
    q: AlgebraicInt
    center: np.ndarray
    radii: np.ndarray
    eps: float

    def contains(self, z) -> bool:
        z = np.asarray(z, dtype=np.complex128)
        return bool(np.all(np.abs(z - self.center) <= self.radii))

    def distance_to(self, point) -> float:
        """Euclidean distance from a point of C^n to the box."""
        gap = np.maximum(np.abs(np.asarray(point) - self.center) - self.radii, 0.0)
        return float(np.sqrt(np.sum(gap**2)))

    def meets_ball(self, center, radius) -> bool:
        return self.distance_to(center) <= radius


def _box_radii(r, q_emb, q_norm, eps):
    radii = np.empty(len(q_emb))
    for i in range(len(q_emb)):
        if r.r[i] > 0:
            radii[i] = eps / (abs(q_emb[i]) * q_norm ** r.r[i])
        else:
            radii[i] = eps / abs(q_emb[i])
    return radii


def delta_box(K: NumberField, r: WeightVector, eps: float, p: AlgebraicInt,
              q: AlgebraicInt) -> DeltaBox:
    if not q or not in_OK_r_eps(K, r, eps, q):
        raise NotAdmissible(f"q={q} is not in O_K(r, {eps})")
    qe, pe = embed(K, q), embed(K, p)
    nrm = weighted_norm_from_embedding(r, qe)
    return DeltaBox(p, q, pe / qe, _box_radii(r, qe, nrm, eps), eps)


# -- lattice search for pairs ----------------------------------------------------------

@dataclass
class PairCandidate:
    p: AlgebraicInt
    q: AlgebraicInt
    p_emb: list = field(repr=False)
    q_emb: list = field(repr=False)


FLOAT_SPREAD = 1e6


def _search_dps(K, first, second):
    spread = max(second) / min(first)
    spread = max(spread, max(first) / min(second), 1.0)
    return max(K.precision, 30 + 2 * int(math.ceil(mpmath.log10(spread))))


def lattice_pairs(K: NumberField, z, first, second, sign: int = 1,
                  max_count: int = 200_000) -> list[PairCandidate]:
    """All (p, q), q != 0, with |sigma(q) z + sign*sigma(p)| <= first[sigma] and
    |sigma(q)| <= second[sigma] for every embedding.

    Each complex coordinate is scaled by its bound so the product of discs sits
    inside a Euclidean ball of radius sqrt(2n); that ball is enumerated exactly
    on an LLL-reduced basis and the candidates are filtered in high precision.
    """
    n = K.n
    first = [mpmath.mpf(x) for x in first]
    second = [mpmath.mpf(x) for x in second]
    dps = _search_dps(K, first, second)
    E = K.embedding_matrix_at(dps)
    with mpmath.workdps(dps):
        zz = [mpmath.mpc(v) for v in z]
        rows = []
        for k in range(n):  # coefficient of p along b_k
            row = []
            for j in range(n):
                v = sign * E[j][k] / first[j]
                row += [mpmath.re(v), mpmath.im(v)]
            row += [mpmath.mpf(0)] * (2 * n)
            rows.append(row)
        for k in range(n):  # coefficient of q along b_k
            row = []
            for j in range(n):
                v = E[j][k] * zz[j] / first[j]
                row += [mpmath.re(v), mpmath.im(v)]
            for j in range(n):
                v = E[j][k] / second[j]
                row += [mpmath.re(v), mpmath.im(v)]
            rows.append(row)
        spread = max(max(second) / min(first), max(first) / min(second))
        if spread < FLOAT_SPREAD:
            # mildly skewed: reduce in floating point, filter exactly below
            _, U = lattice.lll_reduce([[float(v) for v in row] for row in rows])
            reduced = [lattice.combine(U[i], rows) for i in range(2 * n)]
        else:
            reduced, U = lattice.lll_reduce(rows)
        fl = [[float(v) for v in row] for row in reduced]
        xs = lattice.enumerate_short(fl, 2 * n, max_count=max_count, slack=1e-6)
        out = []
        tol = mpmath.mpf(10) ** (-(dps // 2))
        for x in xs:
            coeffs = [sum(x[i] * U[i][c] for i in range(2 * n)) for c in range(2 * n)]
            pc, qc = coeffs[:n], coeffs[n:]
            if not any(qc):
                continue
            pe = [mpmath.fsum(c * e for c, e in zip(pc, E[j]) if c) for j in range(n)]
            qe = [mpmath.fsum(c * e for c, e in zip(qc, E[j]) if c) for j in range(n)]
            ok = all(abs(qe[j] * zz[j] + sign * pe[j]) <= first[j] * (1 + tol)
                     and abs(qe[j]) <= second[j] * (1 + tol) for j in range(n))
            if ok:
                out.append(PairCandidate(K.element(pc), K.element(qc), pe, qe))
    out.sort(key=lambda c: (c.q.coords, c.p.coords))
    return out


@dataclass(frozen=True)
class WitnessReport:
    z: list
    eps: float
    Hmax: float
    verdict: bool
    worst_pair: dict | None

    def to_json(self):
        return {"z": self.z, "eps": self.eps, "Hmax": self.Hmax,
                "verdict": self.verdict, "worst_pair": self.worst_pair}


def _height_mp(r, qe):
    nrm = max(abs(qe[i]) ** (mpmath.mpf(1) / _mpw(r, i)) for i in r.sigma_plus)
    return max(abs(qe[i]) * nrm ** _mpw(r, i) for i in r.sigma_plus), nrm


def _quality_emb_mp(r, z, pe, qe, nrm):
    val = mpmath.mpf(0)
    for i in r.sigma_plus:
        val = max(val, nrm ** _mpw(r, i) * abs(qe[i] * z[i] + pe[i]))
    for i in r.sigma_zero:
        val = max(val, abs(qe[i] * z[i] + pe[i]), abs(qe[i]))
    return val


def _norm_floor(r, eps):
    """Lower bound on ||q|| over admissible q: |N(q)| >= 1 with the zero-weight
    embeddings at most eps forces prod over Sigma_+ of |sigma(q)| >= eps^-n0."""
    n0 = len(r.sigma_zero)
    return min(1.0, float(eps) ** -n0) if n0 else 1.0


def _shell_bounds(r, n, eps, Hmax, bound, n_lo, n_hi):
    first, second = [], []
    for i in range(n):
        if i in r.sigma_plus:
            w = float(r.r[i])
            first.append(bound / n_lo**w)
            second.append(min(n_hi**w, Hmax / n_lo**w))
        else:
            first.append(bound)
            second.append(eps)
    return first, second


SHELL_CAP = 20_000


def _shell_hits(K, r, eps, z, Hmax, bound, n_lo, n_hi):
    """Pairs in one shell with quality <= bound, or OverflowError."""
    first, second = _shell_bounds(r, K.n, eps, Hmax, bound, n_lo, n_hi)
    cands = lattice_pairs(K, z, first, second, sign=1, max_count=SHELL_CAP)
    dps = _search_dps(K, [mpmath.mpf(b) for b in first], [mpmath.mpf(s) for s in second])
    out = []
    with mpmath.workdps(dps):
        zz = [mpmath.mpc(v) for v in z]
        for c in cands:
            if any(abs(c.q_emb[i]) > eps for i in r.sigma_zero):
                continue
            H, nrm = _height_mp(r, c.q_emb)
            if H > Hmax:
                continue
            val = _quality_emb_mp(r, zz, c.p_emb, c.q_emb, nrm)
            if val <= bound * (1 + 1e-12):
                out.append((val, c))
    return out


def _shell_best(K, r, eps, z, Hmax, cap, n_lo, n_hi):
    """Hits of one shell below some bound <= cap that contains its minimum.

    Near a ratio point every multiple of the approximating pair has small
    quality, so a generous bound can hold too many lattice points; the bound
    is then lowered geometrically until the search fits, which keeps the
    minimum because only pairs above the final bound are dropped.
    """
    try:
        return _shell_hits(K, r, eps, z, Hmax, cap, n_lo, n_hi)
    except OverflowError:
        pass
    lo, hi = 0.0, cap
    for _ in range(200):
        mid = hi / 16 if lo == 0.0 else math.sqrt(lo * hi)
        try:
            hits = _shell_hits(K, r, eps, z, Hmax, mid, n_lo, n_hi)
        except OverflowError:
            hi = mid
            continue
        if hits:
            return hits
        lo = mid
        if hi / lo < 1 + 1e-9:
            break
    raise OverflowError("could not isolate the best pair of a shell")


def _hits(K, r, eps, z, Hmax, bound, first_only=False):
    """Admissible (p, q) with H(q) <= Hmax and small quality, best first.

    Shells 2^j <= ||q|| <= 2^(j+1) are searched in turn; within a shell the
    quality bound caps every coordinate, so each lattice search is small.
    The bound shrinks to the best quality seen, so the first entry of the
    result is the minimum over all pairs with quality <= ``bound``.
    """
    found = {}
    if Hmax < 1:
        return []  # admissible q have H(q) >= ||q||^(1/n) >= 1
    n_lo = _norm_floor(r, eps)
    # ||q||^(1/n) <= H(q), and H(q) >= ||q||^(2 r_sigma) at the embedding
    # realising ||q||, hence ||q|| <= H^(1 / (2 min positive weight))
    rmin = min(float(r.r[i]) for i in r.sigma_plus)
    n_top = max(float(Hmax), 1.0) ** min(K.n, 1 / (2 * rmin))
    cap = float(bound)
    while n_lo <= n_top * (1 + 1e-12):
        for val, c in _shell_best(K, r, eps, z, Hmax, cap, n_lo, 2 * n_lo):
            found[(c.q.coords, c.p.coords)] = (val, c)
        if found:
            cap = min(cap, float(min(v for v, _ in found.values())) * (1 + 1e-9))
            if first_only and cap <= eps * (1 + 1e-9):
                break
        n_lo *= 2
    return sorted(found.values(), key=lambda t: (t[0], t[1].q.coords, t[1].p.coords))


def in_bad_eps(K: NumberField, r: WeightVector, eps: float, z, Hmax: float) -> bool:
    """Truncated membership test for Bad_eps(K, r).

    One-sided: ``False`` is definitive (z lies in some Delta_eps(p, q)), while
    ``True`` only certifies avoidance of every box with H(q) <= Hmax.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    hits = _hits(K, r, eps, z, Hmax, eps, first_only=True)
    return not any(val <= eps for val, _ in hits)


def _quick_upper(K, r, eps, z, Hmax):
    """Quality of (best p, q = 1) when that pair is admissible, else None."""
    one = K.one
    if not in_OK_r_eps(K, r, eps, one) or height(K, r, one) > Hmax:
        return None
    zc = np.array([complex(v) for v in z])
    p = best_p(K, zc, one, r, search=1)
    with mpmath.workdps(K.precision):
        zz = [mpmath.mpc(v) for v in z]
        pe, qe = embed_mp(K, p), embed_mp(K, one)
        _, nrm = _height_mp(r, qe)
        return float(_quality_emb_mp(r, zz, pe, qe, nrm)) * (1 + 1e-9)


def witness_report(K: NumberField, r: WeightVector, eps: float, z, Hmax: float,
                   max_doublings: int = 60) -> WitnessReport:
    """Verdict of :func:`in_bad_eps` plus the best pair among heights <= Hmax."""
    warn_if_vacuous(K, r)
    upper = _quick_upper(K, r, eps, z, Hmax)
    bound = max(eps, upper) if upper is not None else eps
    hits = _hits(K, r, eps, z, Hmax, bound)
    for _ in range(max_doublings):
        if hits:
            break
        bound *= 2
        hits = _hits(K, r, eps, z, Hmax, bound)
    verdict = not any(val <= eps for val, _ in hits)
    worst = None
    if hits:
        val, c = hits[0]
        worst = {"p": list(c.p.coords), "q": list(c.q.coords), "quality": float(val)}
    zl = [[float(mpmath.re(v)), float(mpmath.im(v))] for v in map(mpmath.mpc, z)]
    return WitnessReport(zl, float(eps), float(Hmax), verdict, worst)


# -- game constants, ball classes, partitions ---------------------------------------------

@dataclass(frozen=True)
class GameConstants:
    beta: float
    gamma: float
    rho0: float
    n: int
    R: int
    c_K: int = 1

    @property
    def eps(self) -> float:
        return self.rho0 / (4 * float(self.R) ** (4 * self.n))

    def eps_mp(self):
        return mpmath.mpf(self.rho0) / (4 * mpmath.mpf(self.R) ** (4 * self.n))

    def H(self, l: int):
        """H_l = eps R^l / rho0, as an mpmath number."""
        return mpmath.mpf(self.R) ** (l - 4 * self.n) / 4

    def band(self, l: int):
        """The radius band (beta rho0 / R^l, rho0 / R^l] of the class B_l."""
        top = mpmath.mpf(self.rho0) / mpmath.mpf(self.R) ** l
        return mpmath.mpf(self.beta) * top, top

    def check(self) -> bool:
        lhs = self.n / (float(self.R) ** self.gamma - 1)
        ok44 = lhs <= (self.beta**2 / 2) ** self.gamma
        okdisc = 4**self.n * self.eps ** (2 * self.n) < self.c_K
        return ok44 and okdisc and self.rho0 < 1

    def to_json(self):
        return {"beta": self.beta, "gamma": self.gamma, "rho0": self.rho0, "n": self.n,
                "R": self.R, "eps": self.eps, "c_K": self.c_K}


def pick_constants(beta: float, gamma: float, rho0: float, n: int) -> GameConstants:
    """Smallest integer R >= 2 meeting both constraints on the game constants."""
    if not 0 < beta < 1 / 3:
        raise ValueError("beta must lie in (0, 1/3)")
    if gamma <= 0 or not 0 < rho0 < 1:
        raise ValueError("need gamma > 0 and 0 < rho0 < 1")
    target = (beta**2 / 2) ** gamma
    est = (1 + n / target) ** (1 / gamma)
    R = max(2, int(math.floor(est)) - 2)
    while True:
        c = GameConstants(beta, gamma, rho0, n, R)
        if c.check():
            return c
        R += 1


BAND_TOL = 1e-12


def _radius_of(B):
    return B.radius if hasattr(B, "radius") else B


def ball_class(consts: GameConstants, B) -> int:
    """Index l with beta rho0 / R^l < rho(B) <= rho0 / R^l (largest if several)."""
    with mpmath.workdps(max(30, mpmath.mp.dps)):
        rho = mpmath.mpf(_radius_of(B))
        if rho <= 0 or rho > consts.rho0 * (1 + BAND_TOL):
            raise NoClass(f"radius {rho} outside (0, rho0]")
        guess = int(mpmath.floor(mpmath.log(mpmath.mpf(consts.rho0) / rho)
                                 / mpmath.log(consts.R)))
        hits = []
        for l in range(max(0, guess - 1), guess + 2):
            lo, hi = consts.band(l)
            # the closed top end tolerates round-off in radii given as doubles
            if lo < rho <= hi * (1 + BAND_TOL):
                hits.append(l)
    if not hits:
        raise NoClass(f"radius {mpmath.nstr(rho, 10)} lies in a gap between bands")
    return max(hits)


@dataclass(frozen=True)
class PartitionIndex:
    m: int
    l: int

    @property
    def ball_class(self) -> int:
        """Index m' with q in P_{m'+l, l}."""
        return self.m - self.l


def height_band(consts: GameConstants, H) -> int:
    """m with H_m <= H < H_{m+1}; heights below H_1 go to m = 0."""
    H = mpmath.mpf(H)
    if H < consts.H(1):
        return 0
    m = int(mpmath.floor(mpmath.log(4 * H) / mpmath.log(consts.R))) + 4 * consts.n
    while consts.H(m) > H:
        m -= 1
    while consts.H(m + 1) <= H:
        m += 1
    return max(m, 0)


def _norm_band(consts, m, norm_pow):
    """l with H_m R^{4n(l-1)} <= norm_pow < H_m R^{4nl}."""
    Hm = consts.H(m)
    step = mpmath.mpf(consts.R) ** (4 * consts.n)
    l = int(mpmath.floor(mpmath.log(norm_pow / Hm) / mpmath.log(step))) + 1
    while Hm * step ** (l - 1) > norm_pow:
        l -= 1
    while Hm * step**l <= norm_pow:
        l += 1
    return l


def partition_from_embedding(consts, r, q_emb) -> PartitionIndex:
    with mpmath.workdps(max(40, mpmath.mp.dps)):
        H, nrm = _height_mp(r, q_emb)
        m = height_band(consts, H)
        l = _norm_band(consts, m, nrm ** (2 * _mpw(r, r.omega)))
    return PartitionIndex(m, l)


def partition_index(consts: GameConstants, K: NumberField, r: WeightVector,
                    q: AlgebraicInt) -> PartitionIndex:
    """Height band m and norm band l of q, so q lies in P_{m, l}."""
    if not q or not in_OK_r_eps(K, r, consts.eps, q):
        raise NotAdmissible(f"q={q} is not in O_K(r, eps={consts.eps:g})")
    return partition_from_embedding(consts, r, embed_mp(K, q))


def _ball_center_mp(B):
    return [mpmath.mpc(v) for v in B.center]


def _band_bounds(consts, r, m, l, n):
    """Per-embedding bounds on |sigma(q)| for q in P_{m+l, l}, or None if empty.

    Uses H(q) < H_{m+l+1}, the norm band on ||q||^{2 r_max} and
    |sigma(q)| <= ||q||^{r_sigma}, which together give |sigma(q)|^2 <= H(q).
    """
    eps = consts.eps_mp()
    Hcap = consts.H(m + l + 1)
    if Hcap < 1:
        return None  # every admissible q has H(q) >= 1
    rmax = _mpw(r, r.omega)
    step = mpmath.mpf(consts.R) ** (4 * consts.n)
    Hm = consts.H(m + l)
    n_lo = (Hm * step ** (l - 1)) ** (1 / (2 * rmax))
    n_hi = (Hm * step**l) ** (1 / (2 * rmax))
    S = []
    reachable = False
    for i in range(n):
        if i in r.sigma_plus:
            w = _mpw(r, i)
            b = min(mpmath.sqrt(Hcap), n_hi**w, Hcap / n_lo**w)
            reachable = reachable or b >= n_lo**w * (1 - mpmath.mpf(10) ** -20)
            S.append(b)
        else:
            S.append(eps)
    return S if reachable else None


def resonant_bands(consts: GameConstants, K: NumberField, r: WeightVector, B,
                   m: int, l_max: int) -> dict[int, list[tuple[AlgebraicInt, AlgebraicInt]]]:
    """Pairs (p, q) with q in P_{m+l, l}, 1 <= l <= l_max, and Delta_eps(p, q)
    meeting the ball B (class m), grouped by l."""
    n = K.n
    eps = consts.eps_mp()
    out: dict[int, list] = {}
    rho = mpmath.mpf(B.radius)
    center = _ball_center_mp(B)
    extra = eps * max(mpmath.mpf(1), eps) ** len(r.sigma_zero)
    for l in range(1, l_max + 1):
        S = _band_bounds(consts, r, m, l, n)
        if S is None:
            continue
        F = [S[i] * rho + extra for i in range(n)]
        cands = lattice_pairs(K, center, F, S, sign=-1)
        dps = _search_dps(K, F, S)
        with mpmath.workdps(dps):
            for c in cands:
                qe, pe = c.q_emb, c.p_emb
                if any(abs(qe[i]) > eps for i in r.sigma_zero):
                    continue
                idx = partition_from_embedding(consts, r, qe)
                if idx.l != l or idx.ball_class != m:
                    continue
                _, nrm = _height_mp(r, qe)
                gap2 = mpmath.mpf(0)
                for i in range(n):
                    rad = eps / abs(qe[i])
                    if r.r[i] > 0:
                        rad /= nrm ** _mpw(r, i)
                    gap = abs(center[i] - pe[i] / qe[i]) - rad
                    if gap > 0:
                        gap2 += gap**2
                if gap2 <= rho**2:
                    out.setdefault(l, []).append((c.p, c.q))
    return out


def resonant_pairs(consts: GameConstants, K: NumberField, r: WeightVector, B,
                   l: int) -> list[tuple[AlgebraicInt, AlgebraicInt]]:
    """Pairs (p, q) with q in P_{m+l, l} whose box meets B, where B is in class m."""
    m = ball_class(consts, B)
    bands = resonant_bands(consts, K, r, B, m, l)
    return bands.get(l, [])


def cross_ratio_defect(p1, q1, p2, q2) -> AlgebraicInt:
    """p1 q2 - p2 q1, computed exactly in O_K."""
    return p1 * q2 - p2 * q1

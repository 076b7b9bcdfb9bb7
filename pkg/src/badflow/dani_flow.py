"""Lattices attached to a weight vector and a point of C^n, flowed diagonally.

The lattice L_K is the image of O_K x O_K under the embeddings, normalised
to covolume one.  Points z act by the unipotent shear, the weight vector by
the diagonal flow.  Lattices are kept in their realification: 2n generators
in R^{4n}, each complex coordinate split into (re, im).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import lattice
from .errors import DegenerateLattice, NotUnimodular
from .number_field import NumberField, WeightVector, embed_mp


def _realify(vec):
    out = []
    for v in vec:
        v = mpmath.mpc(v)
        out += [v.real, v.imag]
    return out


@dataclass(frozen=True)
class FlowSpec:
    r: WeightVector
    t: float

    def matrix(self) -> np.ndarray:
        """The 2n x 2n diagonal flow matrix."""
        r = np.asarray(self.r.r, dtype=float)
        return np.diag(np.concatenate([np.exp(r * self.t), np.exp(-r * self.t)]))

    def blocks(self):
        return [np.diag([math.exp(w * self.t), math.exp(-w * self.t)]).astype(complex)
                for w in self.r.r]


@dataclass
class RealifiedLattice:
    """Rank-2n lattice in R^{4n} given by generator rows (floats or mpf)."""

    basis: list
    scale: float
    dps: int = 15

    def __post_init__(self):
        if self.rank == 0:
            raise DegenerateLattice("empty generator set")

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def ambient_dim(self) -> int:
        return len(self.basis[0]) if self.basis else 0

    def float_basis(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.basis])

    @property
    def gram(self) -> np.ndarray:
        B = self.float_basis()
        return B @ B.T

    def gram_det(self) -> float:
        with mpmath.workdps(max(self.dps, 30)):
            M = mpmath.matrix(self.basis)
            return float(mpmath.det(M * M.T))

    def check_independent(self):
        if not self.gram_det() > 0:
            raise DegenerateLattice("generators are linearly dependent")

    def scaled(self, c) -> RealifiedLattice:
        return RealifiedLattice([[c * v for v in row] for row in self.basis],
                                self.scale * abs(c), self.dps)


def build_LK(K: NumberField, dps: int | None = None) -> RealifiedLattice:
    """Generators (Theta(b_k), 0) and (0, Theta(b_k)), scaled to covolume one."""
    dps = dps or K.precision
    n = K.n
    with mpmath.workdps(dps):
        scale = mpmath.mpf(abs(K.discriminant)) ** (-mpmath.mpf(1) / (2 * n))
        E = K.embedding_matrix_at(dps)
        rows = []
        for k in range(n):
            col = [scale * E[j][k] for j in range(n)]
            rows.append(_realify(col + [0] * n))
        for k in range(n):
            col = [scale * E[j][k] for j in range(n)]
            rows.append(_realify([0] * n + col))
    return RealifiedLattice(rows, float(scale), dps)


def psi(blocks) -> np.ndarray:
    """Interleave n unimodular 2x2 blocks into one 2n x 2n complex matrix."""
    n = len(blocks)
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for j, g in enumerate(blocks):
        g = np.asarray(g, dtype=complex)
        if abs(np.linalg.det(g) - 1) > 1e-9:
            raise NotUnimodular(f"block {j} has determinant {np.linalg.det(g)}")
        out[j, j], out[j, n + j] = g[0, 0], g[0, 1]
        out[n + j, j], out[n + j, n + j] = g[1, 0], g[1, 1]
    return out


def shear_blocks(z):
    return [np.array([[1, zj], [0, 1]], dtype=complex) for zj in np.asarray(z, dtype=complex)]


def flow_dps(r: WeightVector, T: float, base: int = 60) -> int:
    """Digits keeping the flowed generators trustworthy up to time T."""
    return base + int(math.ceil(r.r_max * abs(T) * math.log10(math.e)))


def _flow_factors(r, t, dps):
    with mpmath.workdps(dps):
        t = mpmath.mpf(t)
        up = [mpmath.exp(mpmath.mpf(w) * t) for w in r.r]
        return up, [1 / u for u in up]


def orbit_lattice(K: NumberField, r: WeightVector, z, t: float,
                  dps: int | None = None) -> RealifiedLattice:
    """The lattice psi(g_r(t)) psi(iota(z)) L_K.

    The generator for (p, q) is scale * (e^{r t}(q z + p), e^{-r t} q)
    coordinatewise over the embeddings.
    """
    n = K.n
    dps = dps or flow_dps(r, t)
    with mpmath.workdps(dps):
        zz = [mpmath.mpc(v) for v in z]
        scale = mpmath.mpf(abs(K.discriminant)) ** (-mpmath.mpf(1) / (2 * n))
        E = K.embedding_matrix_at(dps)
        up, down = _flow_factors(r, t, dps)
        rows = []
        for k in range(n):  # p = b_k, q = 0
            rows.append(_realify([scale * up[j] * E[j][k] for j in range(n)] + [0] * n))
        for k in range(n):  # p = 0, q = b_k
            first = [scale * up[j] * E[j][k] * zz[j] for j in range(n)]
            second = [scale * down[j] * E[j][k] for j in range(n)]
            rows.append(_realify(first + second))
    return RealifiedLattice(rows, float(scale), dps)


def pair_vector(K: NumberField, r: WeightVector, z, t, p, q, dps=None):
    """Realified lattice vector of the pair (p, q) in orbit_lattice(K, r, z, t)."""
    n = K.n
    dps = dps or flow_dps(r, t)
    with mpmath.workdps(dps):
        scale = mpmath.mpf(abs(K.discriminant)) ** (-mpmath.mpf(1) / (2 * n))
        pe, qe = embed_mp(K, p, dps), embed_mp(K, q, dps)
        up, down = _flow_factors(r, t, dps)
        zz = [mpmath.mpc(v) for v in z]
        first = [scale * up[j] * (qe[j] * zz[j] + pe[j]) for j in range(n)]
        second = [scale * down[j] * qe[j] for j in range(n)]
        return _realify(first + second)


@dataclass(frozen=True)
class ShortVector:
    length: float
    coeffs: tuple

    def __iter__(self):
        return iter((self.length, self.coeffs))


def _length_of(coeffs, basis, dps):
    with mpmath.workdps(dps):
        v = lattice.combine(coeffs, basis)
        return float(mpmath.sqrt(mpmath.fsum(x * x for x in v)))


def shortest_vector(L: RealifiedLattice, exact: bool = False, delta: float = 0.99) -> ShortVector:
    """First LLL vector (exact=False) or the true shortest vector (exact=True).

    Coefficients are relative to the generators of ``L``.
    """
    with mpmath.workdps(L.dps):
        reduced, U = lattice.lll_reduce(L.basis, delta)
        if exact:
            fl = [[float(v) for v in row] for row in reduced]
            x, _ = lattice.shortest_enum(fl)
        else:
            x = tuple(int(i == 0) for i in range(L.rank))
        coeffs = tuple(sum(x[i] * U[i][c] for i in range(L.rank)) for c in range(L.rank))
    return ShortVector(_length_of(coeffs, L.basis, L.dps), coeffs)


@dataclass
class OrbitProfile:
    times: np.ndarray
    systoles: np.ndarray
    exact: bool
    slope: float = float("nan")
    intercept: float = float("nan")
    tail_start: float = float("nan")
    coeffs: list = field(default_factory=list, repr=False)

    @property
    def horizon(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0

    @property
    def min_systole(self) -> float:
        return float(np.min(self.systoles))

    def to_rows(self):
        return [(float(t), float(s), int(self.exact)) for t, s in zip(self.times, self.systoles)]


def tail_fit(times, systoles, fraction: float = 0.4):
    """Least-squares slope of log(systole) over the last ``fraction`` of the grid."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2 or times[-1] <= times[0]:
        return float("nan"), float("nan"), float("nan")
    start = times[-1] - fraction * (times[-1] - times[0])
    mask = times >= start - 1e-12
    if mask.sum() < 2:
        return float("nan"), float("nan"), start
    slope, intercept = np.polyfit(times[mask], np.log(np.asarray(systoles)[mask]), 1)
    return float(slope), float(intercept), float(start)


def systole_profile(K: NumberField, r: WeightVector, z, T: float, steps: int,
                    exact: bool = False) -> OrbitProfile:
    """lambda_1 along a uniform grid on [0, T].

    The reduction of each step seeds the next: the new generators are the old
    transformation applied to the flowed basis, which stays nearly reduced,
    so the per-step LLL runs in floating point.
    """
    if T < 0 or steps < 1:
        raise ValueError("need T >= 0 and steps >= 1")
    times = np.linspace(0.0, float(T), steps) if steps > 1 else np.array([0.0])
    dps = flow_dps(r, T, base=25)
    d = 2 * K.n
    U = [[int(i == j) for j in range(d)] for i in range(d)]
    out, coeff_list = [], []
    for t in times:
        L = orbit_lattice(K, r, z, float(t), dps)
        with mpmath.workdps(dps):
            warm = [lattice.combine(U[i], L.basis) for i in range(d)]
            fl = [[float(v) for v in row] for row in warm]
        try:
            _, V = lattice.lll_reduce(fl)
        except DegenerateLattice:
            # float rounding broke the warm basis; fall back to full precision
            with mpmath.workdps(dps):
                _, V = lattice.lll_reduce(warm)
        U = [[sum(V[i][k] * U[k][c] for k in range(d)) for c in range(d)] for i in range(d)]
        with mpmath.workdps(dps):
            red = [lattice.combine(U[i], L.basis) for i in range(d)]
            fl = [[float(v) for v in row] for row in red]
        x = lattice.shortest_enum(fl)[0] if exact else tuple(int(i == 0) for i in range(d))
        coeffs = tuple(sum(x[i] * U[i][c] for i in range(d)) for c in range(d))
        out.append(_length_of(coeffs, L.basis, dps))
        coeff_list.append(coeffs)
    systoles = np.array(out)
    slope, intercept, start = tail_fit(times, systoles)
    return OrbitProfile(times, systoles, exact, slope, intercept, start, coeff_list)


@dataclass(frozen=True)
class OrbitVerdict:
    verdict: str
    horizon: float
    threshold: float
    slope_threshold: float
    slope: float
    min_systole: float

    def to_json(self):
        return {"verdict": self.verdict, "horizon": self.horizon, "threshold": self.threshold,
                "slope_threshold": self.slope_threshold, "slope": self.slope,
                "min_systole": self.min_systole,
                "note": "finite-horizon heuristic over the sampled grid"}


def classify_orbit(profile: OrbitProfile, threshold: float,
                   slope_threshold: float = 0.1) -> OrbitVerdict:
    """Finite-horizon verdict: Escaping, Bounded or Inconclusive.

    Escaping needs a tail slope below -slope_threshold and a small systole;
    Bounded needs every sampled systole >= threshold and a tail slope above
    -slope_threshold.  A profile without a tail is Inconclusive.
    """
    slope, mn = profile.slope, profile.min_systole
    if math.isnan(slope):
        verdict = "Inconclusive"
    elif slope < -slope_threshold and mn < threshold:
        verdict = "Escaping"
    elif mn >= threshold and slope > -slope_threshold:
        verdict = "Bounded"
    else:
        verdict = "Inconclusive"
    return OrbitVerdict(verdict, profile.horizon, threshold, slope_threshold, slope, mn)


def min_systole_squared_identity(K: NumberField, z, p, q):
    """4 scale^2 |q| |q z + p| for a quadratic field under balanced weights: the
    minimum over t of the squared length of the (p, q) vector."""
    scale = abs(K.discriminant) ** (-1 / (2 * K.n))
    zz = complex(z)
    pe = complex(embed_mp(K, p)[0])
    qe = complex(embed_mp(K, q)[0])
    return 4 * scale**2 * abs(qe) * abs(qe * zz + pe)

"""Exact arithmetic in the ring of integers of a totally imaginary field.

Elements of O_K are integer coordinate vectors over a fixed integral basis
``b_1 = 1, b_2, ..., b_n``.  Products go through exact structure constants;
the n complex embeddings are evaluated with mpmath at a configurable number
of digits and cached as a complex128 matrix for vectorised sweeps.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
import sympy

from . import exact
from .errors import (
    ConfigError,
    EmptyRange,
    NotAField,
    NotTotallyImaginary,
    VacuousWeight,
    ZeroElement,
)

CLASS_NUMBER_ONE = (1, 2, 3, 7, 11, 19, 43, 67, 163)


def default_precision() -> int:
    return int(os.environ.get("BADFLOW_PRECISION", "60"))


def _squarefree(d: int) -> bool:
    return all(e == 1 for e in sympy.factorint(d).values())


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    D: int | None = None
    coeffs: tuple[int, ...] | None = None
    basis: tuple[tuple[Fraction, ...], ...] | None = None
    precision: int = field(default_factory=default_precision)
    trusted: bool = False

    def __post_init__(self):
        if self.kind == "quadratic":
            if self.D is None or int(self.D) < 1 or not _squarefree(int(self.D)):
                raise ConfigError(f"D must be a square-free positive integer, got {self.D}")
        elif self.kind == "poly":
            if not self.coeffs or len(self.coeffs) < 3:
                raise ConfigError("poly field needs coefficients of degree >= 2")
            if self.coeffs[-1] != 1:
                raise ConfigError("minimal polynomial must be monic")
        else:
            raise ConfigError(f"unknown field kind {self.kind!r}")
        if self.precision < 16:
            raise ConfigError("precision must be at least 16 digits")

    @classmethod
    def quadratic(cls, D: int, **kw) -> FieldSpec:
        return cls("quadratic", D=int(D), **kw)

    @classmethod
    def poly(cls, coeffs, basis=None, **kw) -> FieldSpec:
        if basis is not None:
            basis = tuple(tuple(Fraction(x) for x in row) for row in basis)
        return cls("poly", coeffs=tuple(int(c) for c in coeffs), basis=basis, **kw)

    @classmethod
    def from_json(cls, obj: dict) -> FieldSpec:
        kw = {}
        if "precision" in obj:
            kw["precision"] = int(obj["precision"])
        if obj.get("kind") == "quadratic":
            return cls.quadratic(obj["D"], **kw)
        if obj.get("kind") == "poly":
            return cls.poly(obj["coeffs"], basis=obj.get("basis"),
                            trusted=bool(obj.get("trusted", False)), **kw)
        raise ConfigError(f"cannot parse field spec {obj!r}")

    def to_json(self) -> dict:
        if self.kind == "quadratic":
            return {"kind": "quadratic", "D": self.D, "precision": self.precision}
        out = {"kind": "poly", "coeffs": list(self.coeffs), "precision": self.precision}
        if self.basis is not None:
            out["basis"] = [[str(x) for x in row] for row in self.basis]
        if self.trusted:
            out["trusted"] = True
        return out

    def minimal_polynomial(self) -> tuple[int, ...]:
        """Coefficients (low to high) of the generator's minimal polynomial."""
        if self.kind == "poly":
            return self.coeffs
        D = self.D
        if D % 4 == 3:
            return ((1 + D) // 4, -1, 1)
        return (D, 0, 1)


def _poly_mulmod(a, b, f):
    """Multiply power-basis coordinate vectors modulo monic f."""
    n = len(f) - 1
    prod = [Fraction(0)] * (2 * n - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                prod[i + j] += x * y
    for d in range(len(prod) - 1, n - 1, -1):
        c = prod[d]
        if c:
            for k in range(n + 1):
                prod[d - n + k] -= c * f[k]
    return prod[:n]


class NumberField:
    """A totally imaginary number field with a chosen integral basis.

    Built by :func:`make_field`; treat instances as immutable.
    """

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self.precision = spec.precision
        f = spec.minimal_polynomial()
        self.minpoly = tuple(f)
        self.n = n = len(f) - 1
        if n % 2:
            raise NotTotallyImaginary("odd degree fields always have a real embedding")
        x = sympy.Symbol("x")
        if spec.kind == "poly" and not spec.trusted:
            if not sympy.Poly(list(reversed(f)), x, domain="QQ").is_irreducible:
                raise NotAField(f"polynomial {list(f)} is reducible over Q")

        if spec.basis is None:
            T = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        else:
            T = [list(row) for row in spec.basis]
            if len(T) != n or any(len(row) != n for row in T):
                raise ConfigError("basis matrix must be n x n")
            if T[0] != [Fraction(1)] + [Fraction(0)] * (n - 1):
                raise ConfigError("first basis element must be 1")
        self.basis = tuple(tuple(row) for row in T)
        Tinv = exact.inverse(T)

        fF = [Fraction(c) for c in f]
        mult = [[None] * n for _ in range(n)]
        for i in range(n):
            for k in range(n):
                pw = _poly_mulmod(T[i], T[k], fF)
                coords = [sum(pw[d] * Tinv[d][l] for d in range(n)) for l in range(n)]
                if any(c.denominator != 1 for c in coords):
                    raise ConfigError("basis does not span a ring (non-integral structure constants)")
                mult[i][k] = tuple(int(c) for c in coords)
        self.mult_tables = tuple(tuple(row) for row in mult)
        # mult_array[i, k, l]: coefficient of b_l in b_i * b_k
        self._mult_array = np.array(mult, dtype=object)

        self._roots = self._ordered_roots(self.precision)
        self.embedding_matrix_mp = self._embedding_matrix_at(self.precision)
        self.embedding_matrix = np.array(
            [[complex(v) for v in row] for row in self.embedding_matrix_mp],
            dtype=np.complex128,
        )
        # realified matrix: rows (Re sigma_1, Im sigma_1, Re sigma_2, ...), columns basis
        E = self.embedding_matrix
        self.real_matrix = np.empty((2 * n, n))
        self.real_matrix[0::2] = E.real
        self.real_matrix[1::2] = E.imag
        self.real_pinv = np.linalg.pinv(self.real_matrix)

        trace_form = [[self._trace(self._mul_coords(self._unit(i), self._unit(k)))
                       for k in range(n)] for i in range(n)]
        self.discriminant = int(exact.det(trace_form))
        self.conj_matrix = self._find_conjugation()

    # -- construction helpers -------------------------------------------------
    def _ordered_roots(self, dps):
        f = self.minpoly
        with mpmath.workdps(dps + 10):
            roots = mpmath.polyroots(list(reversed(f)), maxsteps=400, extraprec=4 * dps)
            tol = mpmath.mpf(10) ** (-(dps // 2))
            upper = []
            for z in roots:
                if abs(mpmath.im(z)) <= tol:
                    raise NotTotallyImaginary(f"real root {mpmath.nstr(z, 15)}")
                if mpmath.im(z) > 0:
                    upper.append(z)
            if len(upper) != self.n // 2:
                raise NotTotallyImaginary("roots are not in conjugate pairs")
            upper.sort(key=lambda z: (float(mpmath.re(z)), float(mpmath.im(z))))
            ordered = []
            for z in upper:
                ordered += [z, mpmath.conj(z)]
        return ordered

    @lru_cache(maxsize=8)
    def _embedding_matrix_at(self, dps):
        if dps == self.precision and hasattr(self, "_roots"):
            roots = self._roots
        else:
            fresh = self._ordered_roots(dps)
            roots = [min(fresh, key=lambda z: abs(z - r0)) for r0 in self._roots]
        with mpmath.workdps(dps):
            rows = []
            for theta in roots:
                powers = [theta**d for d in range(self.n)]
                rows.append(tuple(
                    mpmath.fsum(mpmath.mpf(c.numerator) / c.denominator * powers[d]
                                for d, c in enumerate(self.basis[k]))
                    for k in range(self.n)))
        return tuple(rows)

    def embedding_matrix_at(self, dps: int):
        """Embedding matrix sigma_j(b_k) as mpmath values at ``dps`` digits."""
        return self._embedding_matrix_at(max(int(dps), 16))

    def _find_conjugation(self):
        n = self.n
        with mpmath.workdps(self.precision):
            E = mpmath.matrix(self.embedding_matrix_mp)
            C = mpmath.inverse(E) * E.apply(mpmath.conj)
            out = []
            tol = mpmath.mpf(10) ** (-(self.precision // 3))
            for i in range(n):
                row = []
                for k in range(n):
                    v = C[i, k]
                    r = int(mpmath.nint(mpmath.re(v)))
                    if abs(v - r) > tol:
                        return None
                    row.append(r)
                out.append(tuple(row))
        return tuple(out)

    def _unit(self, i):
        return tuple(int(i == k) for k in range(self.n))

    def _mul_coords(self, a, b):
        n = self.n
        out = [0] * n
        for i, x in enumerate(a):
            if x:
                for k, y in enumerate(b):
                    if y:
                        xy = x * y
                        for l, c in enumerate(self.mult_tables[i][k]):
                            if c:
                                out[l] += xy * c
        return tuple(out)

    def _mult_matrix(self, a):
        """Matrix of multiplication by a: column k holds a * b_k."""
        n = self.n
        cols = [self._mul_coords(a, self._unit(k)) for k in range(n)]
        return [[cols[k][l] for k in range(n)] for l in range(n)]

    def _trace(self, a):
        m = self._mult_matrix(a)
        return sum(m[i][i] for i in range(self.n))

    # -- element constructors ---------------------------------------------------
    def element(self, coords) -> AlgebraicInt:
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(coords)}")
        return AlgebraicInt(coords, self)

    def integer(self, a: int) -> AlgebraicInt:
        return self.element((a,) + (0,) * (self.n - 1))

    @property
    def zero(self) -> AlgebraicInt:
        return self.integer(0)

    @property
    def one(self) -> AlgebraicInt:
        return self.integer(1)

    def gen(self, k: int = 1) -> AlgebraicInt:
        return self.element(self._unit(k))

    @property
    def class_number_one(self) -> bool:
        return self.spec.kind == "quadratic" and self.spec.D in CLASS_NUMBER_ONE

    @property
    def is_quadratic(self) -> bool:
        return self.n == 2

    @property
    def covolume_scale(self) -> float:
        """|D_K|^(-1/(2n)), the factor making Theta(O_K) unimodular."""
        return abs(self.discriminant) ** (-1.0 / (2 * self.n))

    def roots_of_unity(self) -> list[AlgebraicInt]:
        return [q for q in enumerate_bounded(self, 1.0)]

    def __repr__(self):
        if self.spec.kind == "quadratic":
            return f"NumberField(Q(sqrt(-{self.spec.D})), D_K={self.discriminant})"
        return f"NumberField(minpoly={list(self.minpoly)}, D_K={self.discriminant})"


@dataclass(frozen=True)
class AlgebraicInt:
    coords: tuple[int, ...]
    field: NumberField = field(compare=False, repr=False, hash=False)

    def _check(self, other):
        if isinstance(other, int):
            return self.field.integer(other)
        if other.field is not self.field and other.field.minpoly != self.field.minpoly:
            raise ValueError("elements belong to different fields")
        return other

    def __add__(self, other):
        other = self._check(other)
        return AlgebraicInt(tuple(a + b for a, b in zip(self.coords, other.coords)), self.field)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraicInt(tuple(-a for a in self.coords), self.field)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        other = self._check(other)
        return AlgebraicInt(self.field._mul_coords(self.coords, other.coords), self.field)

    __rmul__ = __mul__

    def __bool__(self):
        return any(self.coords)

    def conj(self) -> AlgebraicInt:
        C = self.field.conj_matrix
        if C is None:
            raise ValueError("complex conjugation does not preserve this field (not CM)")
        n = self.field.n
        return AlgebraicInt(tuple(sum(C[l][k] * self.coords[k] for k in range(n))
                                  for l in range(n)), self.field)

    def __str__(self):
        return "(" + ", ".join(map(str, self.coords)) + ")"


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative weights r_sigma indexed by embeddings, summing to one."""

    r: tuple[float, ...]
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if any(x < 0 for x in self.r):
            raise ConfigError("weights must be nonnegative")
        if self.exact is not None:
            if sum(self.exact) != 1:
                raise ConfigError("rational weights must sum to exactly 1")
        elif abs(math.fsum(self.r) - 1.0) > 1e-12:
            raise ConfigError(f"weights sum to {math.fsum(self.r)}, not 1")

    @classmethod
    def of(cls, values) -> WeightVector:
        vals = list(values)
        if all(isinstance(v, (int, Fraction)) or (isinstance(v, str) and "." not in v)
               for v in vals):
            ex = tuple(Fraction(v) for v in vals)
            return cls(tuple(float(v) for v in ex), ex)
        return cls(tuple(float(v) for v in vals))

    @classmethod
    def parse(cls, text: str) -> WeightVector:
        return cls.of([v.strip() for v in text.split(",")])

    @classmethod
    def balanced(cls, n: int) -> WeightVector:
        return cls.of([Fraction(1, n)] * n)

    @classmethod
    def unit(cls, n: int, j: int = 0) -> WeightVector:
        return cls.of([int(i == j) for i in range(n)])

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def sigma_plus(self) -> tuple[int, ...]:
        return tuple(i for i, x in enumerate(self.r) if x > 0)

    @property
    def sigma_zero(self) -> tuple[int, ...]:
        return tuple(i for i, x in enumerate(self.r) if x == 0)

    @property
    def omega(self) -> int:
        top = max(self.r)
        return self.r.index(top)

    @property
    def r_max(self) -> float:
        return self.r[self.omega]

    def to_json(self):
        if self.exact is not None:
            return [str(x) for x in self.exact]
        return list(self.r)


def make_field(spec: FieldSpec) -> NumberField:
    return NumberField(spec)


def quadratic_field(D: int, **kw) -> NumberField:
    return make_field(FieldSpec.quadratic(D, **kw))


def _check_weights(K, r):
    if r.n != K.n:
        raise ConfigError(f"weight vector has {r.n} entries, field degree is {K.n}")


def weight_diagnostics(K: NumberField, r: WeightVector) -> list[str]:
    """Report weight choices for which O_K(r, eps) is empty when eps < 1.

    Conjugate embeddings share modulus, so a zero weight on the partner of a
    positively weighted embedding forces |sigma(q)| >= 1 on Sigma_0.
    """
    _check_weights(K, r)
    E = K.embedding_matrix
    out = []
    for j in r.sigma_zero:
        for i in r.sigma_plus:
            if np.allclose(E[j], np.conj(E[i]), atol=1e-12):
                out.append(
                    f"embedding {j} (weight 0) is the conjugate of embedding {i} "
                    f"(weight {r.r[i]:g}); O_K(r, eps) is empty for eps < 1")
    return out


def warn_if_vacuous(K, r):
    for msg in weight_diagnostics(K, r):
        warnings.warn(msg, VacuousWeight, stacklevel=3)


# -- embeddings and norms ---------------------------------------------------------

def embed(K: NumberField, q: AlgebraicInt) -> np.ndarray:
    """Theta(q) = (sigma_j(q))_j as complex128."""
    return K.embedding_matrix @ np.asarray(q.coords, dtype=float)


def embed_mp(K: NumberField, q, dps: int | None = None) -> list:
    coords = q.coords if isinstance(q, AlgebraicInt) else tuple(q)
    E = K.embedding_matrix_at(dps or K.precision)
    with mpmath.workdps(dps or K.precision):
        return [mpmath.fsum(c * e for c, e in zip(coords, row) if c) for row in E]


def embed_many(K: NumberField, coords) -> np.ndarray:
    """Embeddings of many elements at once; ``coords`` has shape (N, n)."""
    return np.asarray(coords, dtype=float) @ K.embedding_matrix.T


def field_norm(K: NumberField, q: AlgebraicInt) -> int:
    return int(exact.det(K._mult_matrix(q.coords)))


def _require_nonzero(q):
    if not q:
        raise ZeroElement("q must be nonzero")


def weighted_norm_from_embedding(r: WeightVector, emb) -> float:
    emb = np.asarray(emb)
    return max(abs(emb[i]) ** (1.0 / r.r[i]) for i in r.sigma_plus)


def weighted_norms(r: WeightVector, emb: np.ndarray) -> np.ndarray:
    """Vectorised r-norm over rows of an (N, n) embedding array."""
    mods = np.abs(emb[:, list(r.sigma_plus)])
    exps = 1.0 / np.array([r.r[i] for i in r.sigma_plus])
    return np.max(mods**exps, axis=1)


def heights(r: WeightVector, emb: np.ndarray, norms: np.ndarray | None = None) -> np.ndarray:
    if norms is None:
        norms = weighted_norms(r, emb)
    plus = list(r.sigma_plus)
    mods = np.abs(emb[:, plus])
    w = np.array([r.r[i] for i in plus])
    return np.max(mods * norms[:, None] ** w, axis=1)


def weighted_norm(K: NumberField, r: WeightVector, q: AlgebraicInt) -> float:
    _require_nonzero(q)
    _check_weights(K, r)
    return float(weighted_norm_from_embedding(r, embed(K, q)))


def height(K: NumberField, r: WeightVector, q: AlgebraicInt) -> float:
    _require_nonzero(q)
    _check_weights(K, r)
    emb = embed(K, q)
    nrm = weighted_norm_from_embedding(r, emb)
    return float(max(abs(emb[i]) * nrm ** r.r[i] for i in r.sigma_plus))


def in_OK_r_eps(K: NumberField, r: WeightVector, eps: float, q: AlgebraicInt) -> bool:
    _require_nonzero(q)
    _check_weights(K, r)
    emb = embed(K, q)
    return all(abs(emb[i]) <= eps for i in r.sigma_zero)


def coordinate_box(K: NumberField, M: float) -> list[int]:
    """Per-coordinate bounds |c_k| <= B_k for elements with max|sigma(q)| <= M."""
    Einv = np.linalg.inv(K.embedding_matrix)
    return [int(math.floor(np.sum(np.abs(Einv[k])) * M + 1e-9)) for k in range(K.n)]


def enumerate_bounded(K: NumberField, M: float, tol: float = 1e-9) -> list[AlgebraicInt]:
    """All nonzero q with max_j |sigma_j(q)| <= M, sorted by (size, coords)."""
    if M < 1:
        warnings.warn(f"M={M} < 1: no nonzero algebraic integer qualifies", EmptyRange,
                      stacklevel=2)
        return []
    coords = enumerate_bounded_coords(K, M, tol)
    return [AlgebraicInt(tuple(int(c) for c in row), K) for row in coords]


def enumerate_bounded_coords(K: NumberField, M: float, tol: float = 1e-9) -> np.ndarray:
    """Integer coordinate array (N, n) of the elements enumerated above."""
    if M < 1:
        return np.zeros((0, K.n), dtype=np.int64)
    bounds = coordinate_box(K, M)
    first = range(-bounds[0], bounds[0] + 1)
    rest = [np.arange(-b, b + 1) for b in bounds[1:]]
    grid_rest = np.stack(np.meshgrid(*rest, indexing="ij"), -1).reshape(-1, K.n - 1)
    chunks = []
    limit = M * (1 + tol)
    for c0 in first:
        block = np.empty((len(grid_rest), K.n), dtype=np.int64)
        block[:, 0] = c0
        block[:, 1:] = grid_rest
        emb = embed_many(K, block)
        keep = np.max(np.abs(emb), axis=1) <= limit
        keep &= np.any(block != 0, axis=1)
        chunks.append(block[keep])
    out = np.concatenate(chunks) if chunks else np.zeros((0, K.n), dtype=np.int64)
    size = np.round(np.max(np.abs(embed_many(K, out)), axis=1), 9)
    order = np.lexsort(tuple(out[:, k] for k in reversed(range(K.n))) + (size,))
    return out[order]

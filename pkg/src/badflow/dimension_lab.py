"""Box-counting surveys of badly approximable sets on the conjugate diagonal.

For a quadratic field under balanced weights, the point (z, conj z) lies in
the obstruction box of (p, q) exactly when |z - p/q| <= eps / |q|^2, so the
survey works with plane discs of that radius around the ratios p/q, truncated
at H(q) = |q|^2 <= C 2^k on level k.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import ConfigError, InsufficientData, Unsupported
from .number_field import NumberField, embed_many, enumerate_bounded_coords

DEFAULT_C = 0.5
KILL_SLACK = 1e-12


@dataclass(frozen=True)
class Window:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigError("window must have positive width and height")

    @classmethod
    def unit(cls) -> Window:
        return cls(0.0, 1.0, 0.0, 1.0)

    @classmethod
    def parse(cls, text: str) -> Window:
        parts = [float(v) for v in text.split(",")]
        if len(parts) != 4:
            raise ConfigError("window needs x0,x1,y0,y1")
        return cls(*parts)

    @property
    def center(self) -> complex:
        return complex((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    @property
    def half_diagonal(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0) / 2

    def to_json(self):
        return [self.x0, self.x1, self.y0, self.y1]


def bad_K_slice(K: NumberField, z, coords=None) -> np.ndarray:
    """Point of C^n attached to z.

    Quadratic fields give (z, conj z).  Other fields need the real coordinates
    of the point over the integral basis; each embedding is then extended
    R-linearly.
    """
    if K.is_quadratic and coords is None:
        z = complex(z)
        return np.array([z, z.conjugate()])
    if coords is None:
        raise Unsupported("non-quadratic slice needs real basis coordinates")
    x = np.asarray(coords, dtype=float)
    if x.shape != (K.n,):
        raise ConfigError(f"expected {K.n} basis coordinates")
    return K.embedding_matrix @ x


def hmax_rule(k: int, C: float = DEFAULT_C) -> float:
    return C * 2.0**k


def _canonical_denominators(K: NumberField, Qsq: float) -> np.ndarray:
    """One q per associate class with |q|^2 <= Qsq."""
    coords = enumerate_bounded_coords(K, math.sqrt(Qsq))
    if len(coords) == 0:
        return coords
    units = [u.coords for u in K.roots_of_unity()]
    key_best = None
    for u in units:
        uq = _mul_many(K, u, coords)
        keys = [tuple(row) for row in uq]
        key_best = keys if key_best is None else [min(a, b) for a, b in zip(key_best, keys)]
    seen, keep = set(), []
    for i, key in enumerate(key_best):
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return coords[keep]


def _mul_many(K: NumberField, u, coords) -> np.ndarray:
    """Coordinates of u * q for every row q of ``coords``."""
    out = np.zeros_like(coords)
    for i, ui in enumerate(u):
        if ui == 0:
            continue
        for j in range(K.n):
            table = np.asarray(K.mult_tables[i][j], dtype=np.int64)
            out += ui * np.outer(coords[:, j], table)
    return out


def _ratio_points(K: NumberField, q: complex, window: Window, pad: float) -> np.ndarray:
    """All p/q, p in O_K, within distance ``pad`` of the window (rough cut)."""
    reach = abs(q) * (window.half_diagonal + pad)
    target = q * window.center
    omega = complex(K.embedding_matrix[0, 1])
    b_vals = np.arange(math.floor((target.imag - reach) / omega.imag) - 1,
                       math.ceil((target.imag + reach) / omega.imag) + 2)
    pts = []
    for b in b_vals:
        base = b * omega
        lo = math.floor(target.real - reach - base.real) - 1
        hi = math.ceil(target.real + reach - base.real) + 1
        a = np.arange(lo, hi + 1)
        pts.append(a + base)
    p = np.concatenate(pts) if pts else np.zeros(0, dtype=complex)
    r = p / q
    near = ((r.real >= window.x0 - pad) & (r.real <= window.x1 + pad)
            & (r.imag >= window.y0 - pad) & (r.imag <= window.y1 + pad))
    return r[near]


def _kill(alive: np.ndarray, centers: np.ndarray, radius: float, window: Window, k: int):
    """Mark dead every cell whose closed square meets one of the discs."""
    side = 2**k
    hx = (window.x1 - window.x0) / side
    hy = (window.y1 - window.y0) / side
    cx = (centers.real - window.x0) / hx
    cy = (centers.imag - window.y0) / hy
    ix_lo = np.floor(cx - radius / hx).astype(np.int64)
    iy_lo = np.floor(cy - radius / hy).astype(np.int64)
    span_x = int(math.ceil(2 * radius / hx)) + 2
    span_y = int(math.ceil(2 * radius / hy)) + 2
    lim = radius + KILL_SLACK
    for dx in range(span_x):
        ix = ix_lo + dx
        okx = (ix >= 0) & (ix < side)
        gx = np.maximum(0.0, np.maximum(window.x0 + ix * hx - centers.real,
                                        centers.real - (window.x0 + (ix + 1) * hx)))
        for dy in range(span_y):
            iy = iy_lo + dy
            ok = okx & (iy >= 0) & (iy < side)
            gy = np.maximum(0.0, np.maximum(window.y0 + iy * hy - centers.imag,
                                            centers.imag - (window.y0 + (iy + 1) * hy)))
            hit = ok & (gx * gx + gy * gy <= lim * lim)
            alive[iy[hit], ix[hit]] = False


def survivor_grid(K: NumberField, eps: float, window: Window, k: int,
                  C: float = DEFAULT_C) -> np.ndarray:
    """Boolean (2^k, 2^k) array, row = imaginary index: True where the cell meets
    no disc |z - p/q| <= eps/|q|^2 with |q|^2 <= C 2^k."""
    if not K.is_quadratic:
        raise Unsupported("surveys run on the conjugate diagonal of a quadratic field")
    side = 2**k
    alive = np.ones((side, side), dtype=bool)
    if eps <= 0:
        return alive
    qs = _canonical_denominators(K, hmax_rule(k, C))
    q_vals = embed_many(K, qs)[:, 0]
    for q in q_vals:
        rad = eps / abs(q) ** 2
        centers = _ratio_points(K, q, window, rad)
        if len(centers):
            _kill(alive, centers, rad, window, k)
    return alive


@dataclass
class GridSurvey:
    window: Window
    levels: list
    counts: list
    eps: float
    hmax: list
    C: float = DEFAULT_C
    field_spec: dict = field(default_factory=dict)
    base: int = 2

    def rows(self):
        return [(k, n, self.eps, h) for k, n, h in zip(self.levels, self.counts, self.hmax)]

    def to_json(self):
        return {"window": self.window.to_json(), "levels": list(self.levels),
                "counts": list(self.counts), "eps": self.eps, "hmax": list(self.hmax),
                "C": self.C, "field": self.field_spec,
                "base": self.base}


def _level_count(args):
    spec_json, eps, window, k, C = args
    from .number_field import FieldSpec, make_field

    K = make_field(FieldSpec.from_json(spec_json))
    return int(survivor_grid(K, eps, window, k, C).sum())


def survey(K: NumberField, eps: float, window: Window, levels, C: float = DEFAULT_C,
           workers: int = 1) -> GridSurvey:
    """Survivor counts per level; levels run in separate processes if workers > 1."""
    levels = list(levels)
    if workers > 1 and len(levels) > 1:
        jobs = [(K.spec.to_json(), eps, window, k, C) for k in levels]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_level_count, jobs))
    else:
        counts = [int(survivor_grid(K, eps, window, k, C).sum()) for k in levels]
    return GridSurvey(window, levels, counts, float(eps), [hmax_rule(k, C) for k in levels],
                      C, K.spec.to_json())


@dataclass(frozen=True)
class DimensionEstimate:
    slope: float
    intercept: float
    residual: float
    levels: tuple
    counts: tuple

    def to_json(self):
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "levels": list(self.levels), "counts": list(self.counts)}


def box_count_dimension(s: GridSurvey) -> DimensionEstimate:
    """Least-squares slope of log N_k against k log(base) over levels with N_k > 0."""
    pairs = [(k, n) for k, n in zip(s.levels, s.counts) if n > 0]
    if len(pairs) < 3:
        raise InsufficientData("need at least 3 levels with survivors")
    x = np.array([k for k, _ in pairs], dtype=float) * math.log(s.base)
    y = np.log(np.array([n for _, n in pairs], dtype=float))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(math.sqrt(res[0] / len(x))) if len(res) else 0.0
    return DimensionEstimate(float(coef[0]), float(coef[1]), residual,
                             tuple(k for k, _ in pairs), tuple(n for _, n in pairs))


# -- calibration fixtures -------------------------------------------------------------------

def _fixture(name, levels, counts):
    return GridSurvey(Window.unit(), list(levels), list(counts), 0.0,
                      [0.0] * len(counts), 0.0, {"fixture": name})


def full_grid_fixture(levels) -> GridSurvey:
    return _fixture("full_grid", levels, [4**k for k in levels])


def segment_fixture(levels, start=(0.1, 0.2), end=(0.9, 0.7)) -> GridSurvey:
    """Cells of the unit square met by a straight segment."""
    counts = []
    for k in levels:
        side = 2**k
        t = np.linspace(0.0, 1.0, 64 * side + 1)
        x = start[0] + t * (end[0] - start[0])
        y = start[1] + t * (end[1] - start[1])
        cells = set(zip(np.minimum((x * side).astype(int), side - 1),
                        np.minimum((y * side).astype(int), side - 1)))
        counts.append(len(cells))
    return _fixture("segment", levels, counts)


CANTOR_DUST_DIMENSION = math.log(4) / math.log(3)


def cantor_dust_fixture(levels, base: int = 3, depth: int | None = None) -> GridSurvey:
    """Product of two middle-third Cantor sets, dimension log 4 / log 3.

    Cells are half-open with side base^-k; on the natural triadic grid the
    counts are exactly 4^k.  Arithmetic is in integers over 3^depth.
    """
    finest = max(levels) * math.log(base) / math.log(3)
    depth = depth or int(math.ceil(finest)) + 2
    left = np.zeros(1, dtype=object)
    for d in range(1, depth + 1):
        left = np.concatenate([3 * left, 3 * left + 2])
    total = 3**depth
    counts = []
    for k in levels:
        side = base**k
        cols = set()
        for a in left:
            lo = a * side // total
            hi = -((-(a + 1) * side) // total) - 1
            cols.update(range(lo, hi + 1))
        counts.append(len(cols) ** 2)
    s = _fixture("cantor_dust", levels, counts)
    s.base = base
    return s


# -- emitters -------------------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, mpmath.mpf):
        x = float(x)
    return "%.17g" % x


def survey_csv(s: GridSurvey, config: dict) -> str:
    lines = ["# config=" + json.dumps(config, sort_keys=True), "k,N_k,eps,Hmax"]
    lines += [",".join(fmt(v) for v in row) for row in s.rows()]
    return "\n".join(lines) + "\n"


def gnuplot_data(surveys) -> str:
    lines = ["# k log2(N_k) eps"]
    for s in surveys:
        for k, n in zip(s.levels, s.counts):
            if n > 0:
                lines.append(f"{k} {fmt(math.log2(n))} {fmt(s.eps)}")
        lines += ["", ""]
    return "\n".join(lines) + "\n"


def gnuplot_script(data_file: str, surveys) -> str:
    plots = ", ".join(f"'{data_file}' index {i} using 1:2 with linespoints title 'eps={fmt(s.eps)}'"
                      for i, s in enumerate(surveys))
    return ("set xlabel 'k'\nset ylabel 'log2 N_k'\nset key left top\n"
            f"set terminal pngcairo\nset output 'survey.png'\nplot {plots}\n")

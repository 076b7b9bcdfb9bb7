"""Hyperplane-absolute and hyperplane-potential games in C^n.

Geometry runs in mpmath: the winning strategy works with obstruction boxes of
size ~1e-14 and balls that shrink geometrically for dozens of rounds, far
below double precision.  Working digits grow with the number of rounds.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .bad_approx import (
    GameConstants,
    ball_class,
    cross_ratio_defect,
    pick_constants,
    resonant_bands,
    witness_report,
)
from .errors import BudgetExceeded, ConfigError, IllegalMove, NoClass, RatioNotConstant
from .number_field import FieldSpec, NumberField, WeightVector, embed_mp, make_field


def _mpc_str(v, digits):
    v = mpmath.mpc(v)
    return [mpmath.nstr(v.real, digits), mpmath.nstr(v.imag, digits)]


def _mpc_parse(pair):
    return mpmath.mpc(mpmath.mpf(pair[0]), mpmath.mpf(pair[1]))


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: object

    @classmethod
    def make(cls, center, radius) -> Ball:
        return cls(tuple(mpmath.mpc(c) for c in center), mpmath.mpf(radius))

    @property
    def n(self):
        return len(self.center)

    def to_json(self, digits):
        return {"center": [_mpc_str(c, digits) for c in self.center],
                "radius": mpmath.nstr(self.radius, digits)}

    @classmethod
    def from_json(cls, obj) -> Ball:
        return cls(tuple(_mpc_parse(c) for c in obj["center"]), mpmath.mpf(obj["radius"]))


def _norm(v):
    return mpmath.sqrt(mpmath.fsum(abs(x) ** 2 for x in v))


@dataclass(frozen=True)
class HyperplaneNbhd:
    """Open delta-neighbourhood of the complex hyperplane <z, a> = c."""

    normal: tuple
    offset: object
    delta: object

    @classmethod
    def make(cls, normal, offset, delta) -> HyperplaneNbhd:
        return cls(tuple(mpmath.mpc(a) for a in normal), mpmath.mpc(offset),
                   mpmath.mpf(delta))

    @classmethod
    def axis(cls, n, index, offset, delta) -> HyperplaneNbhd:
        return cls.make([1 if i == index else 0 for i in range(n)], offset, delta)

    def contains(self, w) -> bool:
        return hyperplane_distance(w, self) < self.delta

    def to_json(self, digits):
        return {"normal": [_mpc_str(a, digits) for a in self.normal],
                "offset": _mpc_str(self.offset, digits),
                "delta": mpmath.nstr(self.delta, digits)}

    @classmethod
    def from_json(cls, obj) -> HyperplaneNbhd:
        return cls(tuple(_mpc_parse(a) for a in obj["normal"]), _mpc_parse(obj["offset"]),
                   mpmath.mpf(obj["delta"]))


def hermitian(w, a):
    return mpmath.fsum(x * mpmath.conj(y) for x, y in zip(w, a))


def hyperplane_distance(w, H: HyperplaneNbhd):
    """Euclidean distance from w to the hyperplane {z : <z, a> = c}."""
    nrm = _norm(H.normal)
    if abs(nrm - 1) > mpmath.mpf(10) ** -12:
        warnings.warn("hyperplane normal is not a unit vector; renormalising", stacklevel=2)
    return abs(hermitian(w, H.normal) - H.offset) / nrm


@dataclass(frozen=True)
class Legality:
    legal: bool
    reason: str = ""

    def __bool__(self):
        return self.legal


LEGAL = Legality(True)


@dataclass(frozen=True)
class GameConfig:
    mode: str
    beta: float
    gamma: float
    ball0: Ball
    rounds: int
    dps: int

    def __post_init__(self):
        if self.mode not in ("HA", "HP"):
            raise ConfigError("mode must be HA or HP")
        if self.mode == "HA" and not 0 < self.beta < 1 / 3:
            raise ConfigError("HA game needs 0 < beta < 1/3")
        if self.mode == "HP" and not (0 < self.beta < 1 and self.gamma > 0):
            raise ConfigError("HP game needs 0 < beta < 1 and gamma > 0")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")

    @classmethod
    def make(cls, mode, beta, center, rho0, rounds, gamma=1.0, dps=None) -> GameConfig:
        if dps is None:
            dps = working_dps(beta, rounds, rho0)
        with mpmath.workdps(dps):
            ball0 = Ball.make(center, mpmath.mpf(rho0))
        return cls(mode, float(beta), float(gamma), ball0, int(rounds), int(dps))

    @property
    def slack(self):
        return mpmath.mpf(10) ** (-(self.dps - 10))

    def to_json(self):
        return {"mode": self.mode, "beta": self.beta, "gamma": self.gamma,
                "ball0": self.ball0.to_json(self.dps + 5), "rounds": self.rounds,
                "dps": self.dps}

    @classmethod
    def from_json(cls, obj) -> GameConfig:
        with mpmath.workdps(obj["dps"]):
            ball0 = Ball.from_json(obj["ball0"])
        return cls(obj["mode"], obj["beta"], obj["gamma"], ball0, obj["rounds"], obj["dps"])


def working_dps(beta, rounds, rho0=1.0) -> int:
    """Digits needed to resolve balls after ``rounds`` shrinkings by beta."""
    shrink = rounds * math.log10(1 / beta) + max(0.0, -math.log10(rho0))
    return 40 + int(math.ceil(shrink))


@dataclass
class GameState:
    config: GameConfig
    round: int
    ball: Ball
    a_move: list | None = None
    balls: list = field(default_factory=list)


def _as_family(move):
    if isinstance(move, HyperplaneNbhd):
        return [move]
    return list(move)


def validate_move(state: GameState, move) -> Legality:
    """Check an A-move (neighbourhood family) or a B-move (Ball) against the rules."""
    cfg = state.config
    with mpmath.workdps(cfg.dps):
        rho = state.ball.radius
        budget = mpmath.mpf(cfg.beta) * rho
        slack = cfg.slack
        if isinstance(move, Ball):
            B = move
            if B.radius <= 0:
                return Legality(False, "radius_nonpositive")
            if B.radius > rho + slack:
                return Legality(False, "radius_grows")
            if B.radius < budget - slack:
                return Legality(False, "radius_too_small")
            shift = _norm([a - b for a, b in zip(B.center, state.ball.center)])
            if shift > rho - B.radius + slack:
                return Legality(False, "not_nested")
            for k, H in enumerate(state.a_move or []):
                if hyperplane_distance(B.center, H) < H.delta + B.radius - slack:
                    return Legality(False, f"meets_neighbourhood_{k}")
            return LEGAL
        family = _as_family(move)
        for H in family:
            if H.delta <= 0:
                return Legality(False, "delta_nonpositive")
            if abs(_norm(H.normal) - 1) > mpmath.mpf(10) ** -12:
                return Legality(False, "normal_not_unit")
        if cfg.mode == "HA":
            if len(family) != 1:
                return Legality(False, "ha_needs_one_neighbourhood")
            if family[0].delta > budget + slack:
                return Legality(False, "delta_exceeds")
            return LEGAL
        g = mpmath.mpf(cfg.gamma)
        spent = mpmath.fsum(H.delta**g for H in family)
        if spent > budget**g * (1 + slack):
            return Legality(False, "budget_exceeded")
        return LEGAL


# -- transcripts ---------------------------------------------------------------------------

@dataclass
class Transcript:
    config: GameConfig
    balls: list
    a_moves: list
    info: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def limit_point(self):
        return self.balls[-1].center

    def to_json(self) -> dict:
        d = self.config.dps + 5
        with mpmath.workdps(self.config.dps):
            return {
                "config": self.config.to_json(),
                "meta": self.meta,
                "rounds": [
                    {"ball": b.to_json(d), "a_move": [H.to_json(d) for H in a], "info": i}
                    for b, a, i in zip(self.balls, self.a_moves, self.info)
                ],
                "final_ball": self.balls[-1].to_json(d),
                "limit_point": [_mpc_str(c, d) for c in self.limit_point],
                "audit": audit_transcript(self).to_json(),
            }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, obj) -> Transcript:
        cfg = GameConfig.from_json(obj["config"])
        with mpmath.workdps(cfg.dps):
            balls = [Ball.from_json(r["ball"]) for r in obj["rounds"]]
            balls.append(Ball.from_json(obj["final_ball"]))
            moves = [[HyperplaneNbhd.from_json(h) for h in r["a_move"]] for r in obj["rounds"]]
        info = [r.get("info", {}) for r in obj["rounds"]]
        return cls(cfg, balls, moves, info, obj.get("meta", {}))


@dataclass
class AuditReport:
    nesting: list = field(default_factory=list)
    radius_band: list = field(default_factory=list)
    budget: list = field(default_factory=list)
    avoidance: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.nesting or self.radius_band or self.budget or self.avoidance)

    def to_json(self):
        return {"ok": self.ok, "nesting": self.nesting, "radius_band": self.radius_band,
                "budget": self.budget, "avoidance": self.avoidance}


def audit_transcript(tr: Transcript) -> AuditReport:
    """Re-check every recorded move; failures are listed by round index."""
    cfg = tr.config
    rep = AuditReport()
    with mpmath.workdps(cfg.dps):
        slack = cfg.slack
        beta = mpmath.mpf(cfg.beta)
        for j, fam in enumerate(tr.a_moves):
            B, B1 = tr.balls[j], tr.balls[j + 1]
            state = GameState(cfg, j, B)
            if not validate_move(state, fam):
                rep.budget.append(j)
            shift = _norm([a - b for a, b in zip(B1.center, B.center)])
            if shift > B.radius - B1.radius + slack:
                rep.nesting.append(j)
            ratio = B1.radius / B.radius
            if ratio < beta - slack or ratio > 1 + slack:
                rep.radius_band.append(j)
            for H in fam:
                if hyperplane_distance(B1.center, H) < H.delta + B1.radius - slack:
                    rep.avoidance.append(j)
                    break
    return rep


def run_game(config: GameConfig, strategy_a, strategy_b, rounds: int | None = None,
             meta: dict | None = None) -> Transcript:
    """Alternate A and B moves, validating each; raises IllegalMove on a bad move."""
    rounds = rounds or config.rounds
    balls = [config.ball0]
    moves, info = [], []
    with mpmath.workdps(config.dps):
        for j in range(rounds):
            state = GameState(config, j, balls[-1], None, balls)
            fam = _as_family(strategy_a(state))
            verdict = validate_move(state, fam)
            if not verdict:
                raise IllegalMove("A", j, verdict.reason)
            info.append(getattr(strategy_a, "last_info", {}) or {})
            state.a_move = fam
            nxt = strategy_b(state)
            verdict = validate_move(state, nxt)
            if not verdict:
                raise IllegalMove("B", j, verdict.reason)
            moves.append(fam)
            balls.append(nxt)
    tr = Transcript(config, balls, moves, info, dict(meta or {}))
    tr.meta.setdefault("strategy_a", describe(strategy_a))
    tr.meta.setdefault("strategy_b", describe(strategy_b))
    return tr


def describe(strategy) -> dict:
    fn = getattr(strategy, "describe", None)
    return fn() if fn else {"kind": getattr(strategy, "__name__", type(strategy).__name__)}


# -- player A ------------------------------------------------------------------------------

class TrivialA:
    """Smallest interference: HA plays a thin slab tangent to the ball, HP plays nothing."""

    last_info: dict = {}

    def __call__(self, state):
        cfg = state.config
        if cfg.mode == "HP":
            return []
        B = state.ball
        n = B.n
        offset = B.center[0] + B.radius
        return [HyperplaneNbhd.axis(n, 0, offset, mpmath.mpf(cfg.beta) * B.radius / 1000)]

    def describe(self):
        return {"kind": "trivial"}


class BadStrategyA:
    """Player A steering the limit point into Bad_eps(K, r) in the HP game.

    At a ball of class m, for each band l the resonant pairs share one ratio
    point; A removes the neighbourhood of the hyperplane through it normal to
    the omega-th axis, of width the largest omega-radius among their boxes.
    Balls in the gaps between classes get the empty move.  If the constants
    are not given they are fixed at the first ball of radius < 1, which
    becomes the reference ball B_0.
    """

    def __init__(self, K: NumberField, r: WeightVector, consts: GameConstants | None = None,
                 k_max: int | None = None, beta=None, gamma=None):
        self.K, self.r = K, r
        self.consts = consts
        self.k_max = k_max
        self.beta, self.gamma = beta, gamma
        self.last_info = {}
        self.classes_seen: list[int] = []

    def _ensure_constants(self, state):
        if self.consts is not None:
            return True
        if state.ball.radius >= 1:
            return False
        cfg = state.config
        self.consts = pick_constants(self.beta or cfg.beta, self.gamma or cfg.gamma,
                                     float(state.ball.radius), self.K.n)
        return True

    def __call__(self, state):
        self.last_info = {}
        if not self._ensure_constants(state):
            return []
        c = self.consts
        try:
            m = ball_class(c, state.ball)
        except NoClass:
            return []
        k_max = self.k_max if self.k_max is not None else predicted_k_max(c, state.config)
        l_max = max(1, k_max - m)
        self.classes_seen.append(m)
        bands = resonant_bands(c, self.K, self.r, state.ball, m, l_max)
        w = self.r.omega
        family = []
        dps = state.config.dps
        for l in sorted(bands):
            pairs = bands[l]
            p0, q0 = pairs[0]
            for p, q in pairs[1:]:
                if cross_ratio_defect(p0, q0, p, q):
                    raise RatioNotConstant(f"band l={l} at class m={m} has several ratios")
            delta = mpmath.mpf(0)
            eps = c.eps_mp()
            for p, q in pairs:
                qe = embed_mp(self.K, q, dps)
                nrm = max(abs(qe[i]) ** (1 / mpmath.mpf(self.r.r[i])) for i in self.r.sigma_plus)
                rad = eps / abs(qe[w])
                if self.r.r[w] > 0:
                    rad /= nrm ** mpmath.mpf(self.r.r[w])
                delta = max(delta, rad)
            pe, qe = embed_mp(self.K, p0, dps), embed_mp(self.K, q0, dps)
            family.append(HyperplaneNbhd.axis(self.K.n, w, pe[w] / qe[w], delta))
        g = mpmath.mpf(state.config.gamma)
        spent = mpmath.fsum(H.delta**g for H in family)
        cap = (mpmath.mpf(state.config.beta) * state.ball.radius) ** g
        if spent > cap:
            raise BudgetExceeded(f"class m={m}: spent {mpmath.nstr(spent, 8)} > {mpmath.nstr(cap, 8)}")
        self.last_info = {"class": m, "l_cap": l_max,
                          "bands": {str(l): len(v) for l, v in sorted(bands.items())}}
        return family

    def describe(self):
        d = {"kind": "bad", "k_max": self.k_max}
        if self.consts is not None:
            d["constants"] = self.consts.to_json()
        return d


def strategy_A_bad(consts: GameConstants, K: NumberField, r: WeightVector,
                   k_max: int | None = None) -> BadStrategyA:
    return BadStrategyA(K, r, consts, k_max)


def predicted_k_max(consts: GameConstants, config: GameConfig) -> int:
    """Last height band handled when B shrinks by exactly beta every round."""
    with mpmath.workdps(config.dps):
        last = mpmath.mpf(consts.rho0) * mpmath.mpf(config.beta) ** (config.rounds - 1)
        M = int(mpmath.floor(mpmath.log(mpmath.mpf(consts.rho0) / last)
                             / mpmath.log(consts.R)))
    return M + 1


def certified_height(consts: GameConstants, transcript: Transcript):
    """Hmax up to which the limit point must avoid every box: H_{M+1}, M the
    largest ball class A acted on."""
    classes = [i["class"] for i in transcript.info if "class" in i]
    if not classes:
        return consts.H(0)
    return consts.H(max(classes) + 1)


# -- player B ------------------------------------------------------------------------------

class _BaseB:
    def __init__(self, seed=0, tries=200):
        self.seed = seed
        self.tries = tries
        self.rng = np.random.default_rng(seed)

    def _random_offset(self, dim2):
        g = self.rng.standard_normal(dim2)
        g /= np.linalg.norm(g)
        return g * self.rng.random() ** (1.0 / dim2)

    def _from_offset(self, state, vec, reach):
        return tuple(c + reach * mpmath.mpc(float(vec[2 * i]), float(vec[2 * i + 1]))
                     for i, c in enumerate(state.ball.center))

    def _fallback(self, state, rho_new):
        B = state.ball
        reach = B.radius - rho_new
        cands = [B.center]
        for H in state.a_move or []:
            d = hermitian(B.center, H.normal) - H.offset
            u = d / abs(d) if abs(d) > 0 else mpmath.mpc(1)
            for s in (1, -1):
                cands.append(tuple(c + s * reach * u * a for c, a in zip(B.center, H.normal)))
        for cen in cands:
            ball = Ball(tuple(cen), rho_new)
            if validate_move(state, ball):
                return ball
        for _ in range(20 * self.tries):
            ball = Ball(self._from_offset(state, self._random_offset(2 * B.n), reach), rho_new)
            if validate_move(state, ball):
                return ball
        raise IllegalMove("B", state.round, "no legal ball found")


class RandomB(_BaseB):
    """Uniformly random legal ball of radius beta * rho."""

    def __call__(self, state):
        B = state.ball
        rho_new = mpmath.mpf(state.config.beta) * B.radius
        reach = B.radius - rho_new
        for _ in range(self.tries):
            ball = Ball(self._from_offset(state, self._random_offset(2 * B.n), reach), rho_new)
            if validate_move(state, ball):
                return ball
        return self._fallback(state, rho_new)

    def describe(self):
        return {"kind": "random", "seed": self.seed}


class GreedyB(_BaseB):
    """Moves the centre as far towards ``target`` as the rules allow."""

    def __init__(self, target, seed=0, tries=200):
        super().__init__(seed, tries)
        self.target = tuple(mpmath.mpc(t) for t in target)

    def __call__(self, state):
        B = state.ball
        rho_new = mpmath.mpf(state.config.beta) * B.radius
        reach = B.radius - rho_new
        d = [t - c for t, c in zip(self.target, B.center)]
        dist = _norm(d)
        if dist > 0:
            for frac in (1, 0.75, 0.5, 0.25):
                step = min(reach, dist) * mpmath.mpf(frac)
                ball = Ball(tuple(c + x * step / dist for c, x in zip(B.center, d)), rho_new)
                if validate_move(state, ball):
                    return ball
        ball = Ball(B.center, rho_new)
        if validate_move(state, ball):
            return ball
        return self._fallback(state, rho_new)

    def describe(self):
        return {"kind": "greedy", "seed": self.seed,
                "target": [[float(t.real), float(t.imag)] for t in self.target]}


def adversary_B(kind: str, seed: int = 0, target=None):
    if kind == "random":
        return RandomB(seed)
    if kind == "greedy":
        if target is None:
            raise ConfigError("greedy adversary needs a target point")
        return GreedyB(target, seed)
    raise ConfigError(f"unknown adversary {kind!r}")


# -- end-to-end helper ---------------------------------------------------------------------

def play_bad_game(K: NumberField, r: WeightVector, center, *, beta=0.3, gamma=1.0, rho0=0.9,
                  rounds=40, adversary="random", seed=0, target=None):
    """Run strategy_A_bad against an adversary and certify the limit point.

    Returns (transcript, witness report at the run's eps and Hmax).
    """
    consts = pick_constants(beta, gamma, rho0, K.n)
    cfg = GameConfig.make("HP", beta, center, rho0, rounds, gamma=gamma)
    k_max = predicted_k_max(consts, cfg)
    A = strategy_A_bad(consts, K, r, k_max)
    B = adversary_B(adversary, seed, target)
    meta = {"field": K.spec.to_json(), "weights": r.to_json(), "adversary": adversary,
            "seed": seed}
    tr = run_game(cfg, A, B, meta=meta)
    Hmax = certified_height(consts, tr)
    with mpmath.workdps(cfg.dps):
        rep = witness_report(K, r, consts.eps, tr.limit_point, float(Hmax))
    tr.meta["certificate"] = {"eps": consts.eps, "Hmax": float(Hmax), "verdict": rep.verdict}
    return tr, rep


def replay(obj: dict) -> tuple[AuditReport, bool | None]:
    """Re-validate a stored transcript; if it records how it was produced,
    re-run the game and compare the serialisation byte for byte."""
    tr = Transcript.from_json(obj)
    rep = audit_transcript(tr)
    meta = obj.get("meta", {})
    identical = None
    if "field" in meta and meta.get("strategy_a", {}).get("kind") == "bad":
        K = make_field(FieldSpec.from_json(meta["field"]))
        r = WeightVector.of(meta["weights"])
        cfg = tr.config
        with mpmath.workdps(cfg.dps):
            center = list(cfg.ball0.center)
            sb = meta.get("strategy_b", {})
            target = None
            if sb.get("kind") == "greedy":
                target = [complex(*t) for t in sb["target"]]
            tr2, _ = play_bad_game(K, r, center, beta=cfg.beta, gamma=cfg.gamma,
                                   rho0=float(cfg.ball0.radius), rounds=cfg.rounds,
                                   adversary=sb.get("kind", "random"),
                                   seed=sb.get("seed", 0), target=target)
        identical = tr2.dumps() == json.dumps(obj, indent=1, sort_keys=True)
    return rep, identical

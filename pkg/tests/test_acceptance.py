"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line."""

import json
import math
import time

import mpmath
import numpy as np
import pytest
from scipy.stats import spearmanr

from badflow import dani_flow, dimension_lab, lattice
from badflow.bad_approx import (
    bad_constant_up_to_height,
    ball_class,
    cross_ratio_defect,
    delta_box,
    partition_from_embedding,
    pick_constants,
    quality,
    resonant_bands,
)
from badflow.cli import main as cli_main
from badflow.game_engine import Ball, audit_transcript, play_bad_game
from badflow.number_field import (
    WeightVector,
    embed,
    embed_many,
    embed_mp,
    enumerate_bounded,
    enumerate_bounded_coords,
    heights,
    in_OK_r_eps,
    quadratic_field,
    weighted_norms,
)

from conftest import WITNESS_MIN_SYSTOLE, diag, report, witness_vector

FIELDS = {"Q(i)": 1, "Q(sqrt-3)": 3}
BALANCED = WeightVector.balanced(2)
CONSTS = pick_constants(0.3, 1.0, 0.9, 2)


def test_criterion_01_height_sandwich():
    start = time.perf_counter()
    violations, total = 0, 0
    for D in FIELDS.values():
        K = quadratic_field(D)
        Q = enumerate_bounded_coords(K, 20)
        emb = embed_many(K, Q)
        norms = weighted_norms(BALANCED, emb)
        H = heights(BALANCED, emb, norms)
        lower = norms ** (1 / K.n)
        upper = norms ** (2 * BALANCED.r_max)
        tol = 1e-9
        bad = (lower < 1 - tol) | (lower > H * (1 + tol)) | (H > upper * (1 + tol))
        violations += int(bad.sum())
        total += len(Q)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 10
    report(1, ok, f"{total} q checked, {violations} violations, {elapsed:.2f}s")
    assert ok


def test_criterion_02_partition_cover():
    orphans, total = [], 0
    step = mpmath.mpf(CONSTS.R) ** (4 * CONSTS.n)
    cases = [(1, BALANCED), (3, BALANCED), (1, WeightVector.of(["3/10", "7/10"]))]
    for D, r in cases:
        K = quadratic_field(D)
        for q in enumerate_bounded(K, 20):
            if not in_OK_r_eps(K, r, CONSTS.eps, q):
                continue
            total += 1
            with mpmath.workdps(40):
                qe = embed_mp(K, q, 40)
                idx = partition_from_embedding(CONSTS, r, qe)
                nrm = max(abs(qe[i]) ** (1 / mpmath.mpf(r.r[i])) for i in r.sigma_plus)
                Hq = max(abs(qe[i]) * nrm ** mpmath.mpf(r.r[i]) for i in r.sigma_plus)
                npow = nrm ** (2 * mpmath.mpf(r.r_max))
                Hm = CONSTS.H(idx.m)
                placed = (idx.l >= 1 and Hm <= Hq < CONSTS.H(idx.m + 1)
                          and Hm * step ** (idx.l - 1) <= npow < Hm * step**idx.l)
            if not placed:
                orphans.append((D, q.coords))
    ok = not orphans
    report(2, ok, f"{total} admissible q placed, {len(orphans)} orphans")
    assert ok


def test_criterion_03_single_ratio_per_band():
    rng = np.random.default_rng(2024)
    K = quadratic_field(1)
    violations, nonempty, pairs_seen = 0, 0, 0
    for _ in range(100):
        a, b = rng.integers(-3, 4, size=2)
        c, d = rng.integers(-4, 5, size=2)
        if (c, d) == (0, 0):
            c = 1
        m = int(rng.integers(4, 10))
        lo, hi = CONSTS.band(m)
        with mpmath.workdps(50):
            rho = lo + (hi - lo) * mpmath.mpf(float(rng.uniform(0.05, 1.0)))
            ratio = mpmath.mpc(int(a), int(b)) / mpmath.mpc(int(c), int(d))
            shift = mpmath.mpc(*rng.normal(size=2)) * rho * float(rng.uniform(0, 3))
            centre = ratio + shift
            B = Ball.make([centre, mpmath.conj(centre)], rho)
            assert ball_class(CONSTS, B) == m
            bands = resonant_bands(CONSTS, K, BALANCED, B, m, 3)
        for pairs in bands.values():
            nonempty += 1
            pairs_seen += len(pairs)
            p0, q0 = pairs[0]
            violations += sum(bool(cross_ratio_defect(p0, q0, p, q)) for p, q in pairs)
    ok = violations == 0 and nonempty > 0
    report(3, ok, f"100 configurations, {nonempty} nonempty bands, {pairs_seen} pairs, "
                  f"{violations} violations")
    assert ok


def test_criterion_04_box_quality_equivalence():
    rng = np.random.default_rng(4)
    setups = [(quadratic_field(1), BALANCED, 0.1), (quadratic_field(3), BALANCED, 0.05),
              (quadratic_field(1), WeightVector.of(["3/10", "7/10"]), 0.2),
              (quadratic_field(1), WeightVector.unit(2), 2.0)]
    disagreements, inside = 0, 0
    for i in range(1000):
        K, r, eps = setups[i % len(setups)]
        while True:
            q = K.element(rng.integers(-4, 5, size=2))
            if q and in_OK_r_eps(K, r, eps, q):
                break
        p = K.element(rng.integers(-6, 7, size=2))
        box = delta_box(K, r, eps, p, q)
        jitter = rng.uniform(-1.5, 1.5, size=2) + 1j * rng.uniform(-1.5, 1.5, size=2)
        z = box.center + box.radii * jitter / math.sqrt(2)
        member = box.contains(z)
        val = quality(K, r, z, -p, q)
        inside += member
        if member != (val <= eps) and abs(val - eps) > 1e-12 * max(1.0, eps):
            disagreements += 1
    ok = disagreements == 0
    report(4, ok, f"1000 samples ({inside} inside), {disagreements} disagreements")
    assert ok


def test_criterion_05_conjugate_diagonal_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(1000):
        K = quadratic_field(1 if i % 2 else 3)
        q = K.element(rng.integers(-20, 21, size=2))
        if not q:
            continue
        p = K.element(rng.integers(-20, 21, size=2))
        z = complex(*rng.uniform(-2, 2, size=2))
        qc, pc = embed(K, q)[0], embed(K, p)[0]
        want = abs(qc) * abs(qc * z + pc)
        got = quality(K, BALANCED, diag(z), p, q)
        worst = max(worst, abs(got - want) / want)
    ok = worst <= 1e-12
    report(5, ok, f"1000 samples, worst relative error {worst:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_06_flow_contrast():
    K = quadratic_field(1)
    rng = np.random.default_rng(6)
    slopes = []
    for _ in range(20):
        while True:
            a, b, c, d = (int(v) for v in rng.integers(-4, 5, size=4))
            if (c, d) != (0, 0):
                break
        with mpmath.workdps(100):
            w = mpmath.mpc(a, b) / mpmath.mpc(c, d)
            prof = dani_flow.systole_profile(K, BALANCED, [w, mpmath.conj(w)], 16, 81)
        slopes.append(prof.slope)
    slope_ok = all(abs(s + BALANCED.r_max) <= 0.1 * BALANCED.r_max for s in slopes)

    witness = dani_flow.systole_profile(K, BALANCED, witness_vector(), 20, 201, exact=True)
    pinned_ok = witness.min_systole >= WITNESS_MIN_SYSTOLE * (1 - 1e-9)

    T = 10.0
    zs = [complex(*rng.random(2)) for _ in range(100)]
    systoles = [dani_flow.systole_profile(K, BALANCED, diag(z), T, 101, exact=True).min_systole
                for z in zs]
    # H(q) = |q|^2 here, so heights up to e^T match the flow horizon
    constants = [bad_constant_up_to_height(K, BALANCED, diag(z), math.exp(T / 2)) for z in zs]
    rho = float(spearmanr(systoles, constants).statistic)

    ok = slope_ok and pinned_ok and rho >= 0.8
    report(6, ok, f"ratio slopes in [{min(slopes):.4f}, {max(slopes):.4f}], witness min "
                  f"{witness.min_systole:.10f}, Spearman {rho:.4f}")
    assert ok


@pytest.mark.slow
def test_criterion_07_game_audits():
    K = quadratic_field(1)
    rng = np.random.default_rng(7)
    targets = sorted({complex(p) / complex(q) for q in (1, 1 + 1j, 2, 2 + 1j, 1 + 2j)
                      for p in [complex(a, b) for a in range(-3, 4) for b in range(-3, 4)]
                      if 0 <= (complex(p) / complex(q)).real <= 1
                      and 0 <= (complex(p) / complex(q)).imag <= 1},
                     key=lambda z: (z.real, z.imag))
    failures = []
    for seed in range(100):
        if seed < 50:
            centre, kind, target = complex(*rng.random(2)), "random", None
        else:
            t = targets[seed % len(targets)]
            offset = complex(*rng.normal(size=2))
            centre = t + offset / abs(offset) * rng.uniform(0.05, 0.45)
            kind, target = "greedy", diag(t)
        tr, rep = play_bad_game(K, BALANCED, diag(centre), rounds=40, adversary=kind,
                                seed=seed, target=target)
        audit = audit_transcript(tr)
        if not (audit.ok and rep.verdict):
            failures.append((seed, audit.to_json(), rep.to_json()))
    ok = not failures
    report(7, ok, f"100 games (50 random, 50 greedy), {len(failures)} failures")
    assert ok, failures[:3]


def test_criterion_08_lattice_reduction():
    rng = np.random.default_rng(8)
    bad = 0
    for _ in range(50):
        B = rng.normal(size=(4, 4)) * rng.uniform(0.2, 5, size=(4, 1))
        reduced, U = lattice.lll_reduce(B.tolist())
        lam = math.sqrt(lattice.shortest_enum(reduced)[1])
        first = math.sqrt(lattice.norm_sq(reduced[0]))
        if not (lam <= first * (1 + 1e-12) <= 2**1.5 * lam * (1 + 1e-12)):
            bad += 1
        if not lattice.is_unimodular(U):
            bad += 1
    ok = bad == 0
    report(8, ok, f"50 rank-4 lattices, {bad} failures")
    assert ok


@pytest.mark.slow
def test_criterion_09_dimension_trend():
    K = quadratic_field(1)
    start = time.perf_counter()
    slopes = {}
    for eps in (0.05, 0.15, 0.3):
        s = dimension_lab.survey(K, eps, dimension_lab.Window.unit(), range(3, 9), workers=4)
        slopes[eps] = dimension_lab.box_count_dimension(s).slope
    elapsed = time.perf_counter() - start
    full = dimension_lab.box_count_dimension(dimension_lab.full_grid_fixture(range(3, 9))).slope
    dust = dimension_lab.box_count_dimension(dimension_lab.cantor_dust_fixture(range(1, 7))).slope
    ok = (slopes[0.05] >= slopes[0.15] >= slopes[0.3] and abs(full - 2) <= 0.01
          and abs(dust - dimension_lab.CANTOR_DUST_DIMENSION) <= 0.07 and elapsed < 300)
    report(9, ok, "slopes " + ", ".join(f"eps={e}: {v:.4f}" for e, v in slopes.items())
           + f"; full grid {full:.4f}; dust {dust:.4f}; {elapsed:.1f}s")
    assert ok


def test_criterion_10_determinism(tmp_path):
    runs = {
        "survey_eps0.05.csv": ["dim", "survey", "--D", "1", "--eps", "0.05", "--levels", "3:7"],
        "profile.csv": ["orbit", "profile", "--D", "1", "--z", "0.3+0.21j", "--horizon", "8",
                        "--steps", "33", "--exact"],
        "boxes.csv": ["boxes", "dump", "--D", "3", "--z", "0.2+0.4j", "--qmax", "4"],
        "transcript.json": ["game", "run", "--D", "1", "--rounds", "15", "--seed", "11",
                            "--adversary", "random"],
    }
    differing = []
    for name, argv in runs.items():
        blobs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{name}-{rep}"
            assert cli_main(argv + ["--seed", "11", "--out", str(out)]) == 0
            blobs.append((out / name).read_bytes())
        if blobs[0] != blobs[1]:
            differing.append(name)
    ok = not differing
    report(10, ok, f"{len(runs)} artifacts re-run, byte-identical: {len(runs) - len(differing)}")
    assert ok, differing

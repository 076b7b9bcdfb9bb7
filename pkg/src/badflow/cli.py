"""Command-line front end: ``badflow <group> <action> [flags]``.

Every run writes its artifacts under ``--out`` and embeds the fully resolved
configuration in each of them.  Exit codes: 0 success, 2 invalid
configuration, 3 failed internal check (for example a transcript audit),
64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import mpmath
import numpy as np

from . import bad_approx, dani_flow, dimension_lab, game_engine
from .errors import BadflowError, ConfigError, IllegalMove
from .number_field import (
    FieldSpec,
    WeightVector,
    default_precision,
    embed,
    enumerate_bounded,
    in_OK_r_eps,
    make_field,
    weight_diagnostics,
)

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_USAGE = 0, 2, 3, 64

COMMANDS = {
    "field": ("info",),
    "bad": ("constant",),
    "boxes": ("dump",),
    "game": ("run", "replay"),
    "orbit": ("profile",),
    "dim": ("survey",),
}

USAGE = "usage: badflow {" + ",".join(
    f"{g} {'|'.join(a)}" for g, a in COMMANDS.items()) + "} [options]"


def fmt(x) -> str:
    return dimension_lab.fmt(x)


# -- argument parsing ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--field-D", "--D", dest="field_D", type=int, default=None,
                   help="square-free D > 0 for Q(sqrt(-D))")
    p.add_argument("--field-poly", dest="field_poly", default=None,
                   help="monic minimal polynomial, coefficients low to high: c0,c1,...,1")
    p.add_argument("--weights", default=None, help="comma-separated weights, e.g. 1/2,1/2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="badflow-out", help="output directory")
    p.add_argument("--config", default=None, help="JSON file; its keys override flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="badflow", description="Badly approximable "
                                     "vectors over number fields: games, flows, surveys.")
    groups = parser.add_subparsers(dest="group", required=True)

    g = groups.add_parser("field").add_subparsers(dest="action", required=True)
    _common(g.add_parser("info", help="degree, discriminant and embeddings"))

    g = groups.add_parser("bad").add_subparsers(dest="action", required=True)
    p = g.add_parser("constant", help="best approximation quality up to a height")
    _common(p)
    p.add_argument("--z", required=False, default=None,
                   help="point: one complex (quadratic slice) or n comma-separated")
    p.add_argument("--hmax", type=float, default=1e4)
    p.add_argument("--eps", type=float, default=None,
                   help="also report membership in Bad_eps at this eps")

    g = groups.add_parser("boxes").add_subparsers(dest="action", required=True)
    p = g.add_parser("dump", help="obstruction boxes near a point")
    _common(p)
    p.add_argument("--z", default=None)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--qmax", type=float, default=5.0, help="bound on max |sigma(q)|")
    p.add_argument("--radius", type=float, default=0.5,
                   help="keep boxes whose centre is this close to z in every coordinate")

    g = groups.add_parser("game").add_subparsers(dest="action", required=True)
    p = g.add_parser("run", help="strategy A against an adversary")
    _common(p)
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--rho0", type=float, default=0.9)
    p.add_argument("--rounds", type=int, default=40)
    p.add_argument("--center", default=None, help="initial centre (same format as --z)")
    p.add_argument("--adversary", choices=["random", "greedy"], default="random")
    p.add_argument("--target", default=None, help="greedy target (same format as --z)")
    p = g.add_parser("replay", help="re-audit a stored transcript")
    p.add_argument("transcript")
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)

    g = groups.add_parser("orbit").add_subparsers(dest="action", required=True)
    p = g.add_parser("profile", help="systole along the diagonal flow")
    _common(p)
    p.add_argument("--z", default=None)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--exact", action="store_true", help="enumerate the true shortest vector")
    p.add_argument("--threshold", type=float, default=None,
                   help="systole threshold for the verdict (default 0.5)")

    g = groups.add_parser("dim").add_subparsers(dest="action", required=True)
    p = g.add_parser("survey", help="box-counting survey on the conjugate diagonal")
    _common(p)
    p.add_argument("--eps", default="0.05", help="comma-separated eps values")
    p.add_argument("--levels", default="3:8", help="inclusive range a:b")
    p.add_argument("--window", default="0,1,0,1", help="x0,x1,y0,y1")
    p.add_argument("--C", type=float, default=dimension_lab.DEFAULT_C,
                   help="height cutoff constant: H(q) <= C 2^k at level k")
    p.add_argument("--workers", type=int, default=1)
    return parser


class _Usage(Exception):
    pass


def _check_command(argv) -> None:
    words = [a for a in argv if not a.startswith("-")][:2]
    if not words or words[0] not in COMMANDS:
        raise _Usage(words[0] if words else "")
    if len(words) < 2 or words[1] not in COMMANDS[words[0]]:
        raise _Usage(" ".join(words))


def _resolve(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "config"}
    if args.config:
        try:
            extra = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(extra, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(extra) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(extra)
    cfg["precision"] = default_precision()
    return cfg


def _field(cfg):
    if cfg.get("field_poly"):
        coeffs = [int(c) for c in str(cfg["field_poly"]).split(",")]
        spec = FieldSpec.poly(coeffs, precision=cfg["precision"])
    else:
        spec = FieldSpec.quadratic(cfg.get("field_D") or 1, precision=cfg["precision"])
    K = make_field(spec)
    cfg["field"] = spec.to_json()
    return K


def _weights(cfg, K):
    r = WeightVector.parse(cfg["weights"]) if cfg.get("weights") else WeightVector.balanced(K.n)
    if r.n != K.n:
        raise ConfigError(f"need {K.n} weights, got {r.n}")
    cfg["weights"] = ",".join(r.to_json()) if r.exact else ",".join(fmt(x) for x in r.r)
    return r


def _point(text, K, default=None):
    if text is None:
        if default is None:
            raise ConfigError("a point is required")
        text = default
    try:
        vals = [complex(v.strip().replace(" ", "")) for v in str(text).split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse point {text!r}") from exc
    if len(vals) == 1 and K.n > 1:
        return list(dimension_lab.bad_K_slice(K, vals[0]))
    if len(vals) != K.n:
        raise ConfigError(f"point needs 1 or {K.n} complex coordinates")
    return vals


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("out") or "badflow-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _provenance(cfg) -> dict:
    """Config recorded inside artifacts; the output location is left out so
    identical runs give identical bytes wherever they are written."""
    return {k: v for k, v in cfg.items() if k != "out"}


def _csv_text(cfg, header, rows) -> str:
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(_provenance(cfg), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else v
                    for v in row])
    return buf.getvalue()


# -- subcommands ---------------------------------------------------------------------------

def cmd_field_info(cfg) -> int:
    K = _field(cfg)
    out = _out_dir(cfg)
    E = K.embedding_matrix
    print(f"degree: {K.n}")
    print(f"discriminant D_K: {K.discriminant}")
    print(f"minimal polynomial (low to high): {list(K.minpoly)}")
    print("embedding matrix (rows: embeddings, columns: integral basis):")
    for row in E:
        print("  " + "  ".join(f"{fmt(v.real)}{'+' if v.imag >= 0 else '-'}{fmt(abs(v.imag))}i"
                               for v in row))
    print(f"CM conjugation available: {K.conj_matrix is not None}")
    _write_json(out / "field.json", {
        "config": cfg, "degree": K.n, "discriminant": K.discriminant,
        "embedding_matrix": [[[fmt(v.real), fmt(v.imag)] for v in row] for row in E],
        "roots_of_unity": len(K.roots_of_unity()),
    })
    return EXIT_OK


def cmd_bad_constant(cfg) -> int:
    K = _field(cfg)
    r = _weights(cfg, K)
    for msg in weight_diagnostics(K, r):
        print(f"note: {msg}")
    z = _point(cfg.get("z"), K, default="0.3+0.21j")
    cfg["z"] = ",".join(repr(complex(v)) for v in z)
    eps = cfg.get("eps")
    rep = bad_approx.witness_report(K, r, eps if eps else 1e-3, z, float(cfg["hmax"]))
    out = _out_dir(cfg)
    result = {"config": cfg, "report": rep.to_json()}
    if not eps:
        result["report"].pop("verdict")
        result["report"]["eps"] = None
    _write_json(out / "bad_constant.json", result)
    wp = rep.worst_pair
    if wp:
        print(f"best quality up to H={fmt(cfg['hmax'])}: {fmt(wp['quality'])} "
              f"at p={wp['p']} q={wp['q']}")
    else:
        print("no admissible q up to the given height")
    if eps:
        print(f"in Bad_eps (eps={fmt(eps)}, truncated at H): {rep.verdict}")
    return EXIT_OK


def cmd_boxes_dump(cfg) -> int:
    K = _field(cfg)
    r = _weights(cfg, K)
    z = _point(cfg.get("z"), K, default="0")
    cfg["z"] = ",".join(repr(complex(v)) for v in z)
    eps, M, rad = float(cfg["eps"]), float(cfg["qmax"]), float(cfg["radius"])
    rows = []
    for q in enumerate_bounded(K, M):
        if not in_OK_r_eps(K, r, eps, q):
            continue
        qe = embed(K, q)
        cands = bad_approx.lattice_pairs(K, z, [abs(v) * rad for v in qe],
                                         [abs(v) for v in qe], sign=-1)
        for c in cands:
            if c.q != q:
                continue
            box = bad_approx.delta_box(K, r, eps, c.p, q)
            rows.append([" ".join(map(str, c.p.coords)), " ".join(map(str, q.coords))]
                        + [fmt(v) for b in box.center for v in (b.real, b.imag)]
                        + [fmt(v) for v in box.radii])
    n = K.n
    header = (["p", "q"] + [f"{part}{i}" for i in range(n) for part in ("center_re", "center_im")]
              + [f"radius{i}" for i in range(n)])
    out = _out_dir(cfg)
    (out / "boxes.csv").write_text(_csv_text(cfg, header, rows))
    print(f"{len(rows)} boxes written to {out / 'boxes.csv'}")
    return EXIT_OK


def cmd_game_run(cfg) -> int:
    K = _field(cfg)
    r = _weights(cfg, K)
    center = _point(cfg.get("center"), K, default="0.3+0.2j")
    cfg["center"] = ",".join(repr(complex(v)) for v in center)
    target = None
    if cfg["adversary"] == "greedy":
        target = _point(cfg.get("target"), K, default="0.5+0.5j")
        cfg["target"] = ",".join(repr(complex(v)) for v in target)
    tr, rep = game_engine.play_bad_game(
        K, r, center, beta=float(cfg["beta"]), gamma=float(cfg["gamma"]),
        rho0=float(cfg["rho0"]), rounds=int(cfg["rounds"]), adversary=cfg["adversary"],
        seed=int(cfg["seed"]), target=target)
    tr.meta["resolved_config"] = _provenance(cfg)
    out = _out_dir(cfg)
    (out / "transcript.json").write_text(tr.dumps() + "\n")
    audit = game_engine.audit_transcript(tr)
    lp = tr.limit_point
    print(f"rounds: {cfg['rounds']}  final radius: {mpmath.nstr(tr.balls[-1].radius, 6)}")
    print("limit point: " + ", ".join(mpmath.nstr(c, 17) for c in lp))
    print(f"audit: {'ok' if audit.ok else 'FAILED'}")
    print(f"in Bad_eps at eps={fmt(rep.eps)} up to H={fmt(rep.Hmax)}: {rep.verdict}")
    return EXIT_OK if audit.ok and rep.verdict else EXIT_CHECK


def cmd_game_replay(cfg) -> int:
    try:
        obj = json.loads(Path(cfg["transcript"]).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read transcript: {exc}") from exc
    resolved = obj.get("meta", {}).pop("resolved_config", None)
    rep, identical = game_engine.replay(obj)
    if resolved is not None:
        obj["meta"]["resolved_config"] = resolved
    print(f"audit: {'ok' if rep.ok else 'FAILED'}")
    if identical is not None:
        print(f"re-simulation identical: {identical}")
    if cfg.get("out"):
        _write_json(_out_dir(cfg) / "replay.json",
                    {"config": cfg, "audit": rep.to_json(), "identical": identical})
    return EXIT_OK if rep.ok and identical is not False else EXIT_CHECK


def cmd_orbit_profile(cfg) -> int:
    K = _field(cfg)
    r = _weights(cfg, K)
    z = _point(cfg.get("z"), K, default="0.3+0.21j")
    cfg["z"] = ",".join(repr(complex(v)) for v in z)
    prof = dani_flow.systole_profile(K, r, z, float(cfg["horizon"]), int(cfg["steps"]),
                                     exact=bool(cfg["exact"]))
    thr = cfg.get("threshold")
    thr = 0.5 if thr is None else float(thr)
    verdict = dani_flow.classify_orbit(prof, thr)
    out = _out_dir(cfg)
    (out / "profile.csv").write_text(
        _csv_text(cfg, ["t", "lambda1", "exact_flag"], prof.to_rows()))
    _write_json(out / "verdict.json", {"config": cfg, **verdict.to_json()})
    print(f"min systole on [0, {fmt(prof.horizon)}]: {fmt(prof.min_systole)}")
    print(f"tail slope of log systole: {fmt(prof.slope)}")
    print(f"verdict (finite horizon): {verdict.verdict}")
    return EXIT_OK


def _levels(text):
    try:
        a, b = (int(v) for v in str(text).split(":"))
    except ValueError as exc:
        raise ConfigError("--levels must look like a:b") from exc
    if a < 0 or b < a:
        raise ConfigError("--levels needs 0 <= a <= b")
    return list(range(a, b + 1))


def cmd_dim_survey(cfg) -> int:
    K = _field(cfg)
    r = _weights(cfg, K)
    if not K.is_quadratic or abs(r.r[0] - r.r[1]) > 0:
        raise ConfigError("surveys need a quadratic field with balanced weights")
    levels = _levels(cfg["levels"])
    eps_list = [float(v) for v in str(cfg["eps"]).split(",")]
    window = dimension_lab.Window.parse(str(cfg["window"]))
    out = _out_dir(cfg)
    surveys, summary = [], []
    for eps in eps_list:
        s = dimension_lab.survey(K, eps, window, levels, float(cfg["C"]), int(cfg["workers"]))
        surveys.append(s)
        name = f"survey_eps{eps:g}.csv"
        (out / name).write_text(dimension_lab.survey_csv(s, _provenance(cfg)))
        try:
            est = dimension_lab.box_count_dimension(s).to_json()
        except BadflowError as exc:
            est = {"slope": None, "error": str(exc)}
        summary.append({"eps": eps, "csv": name, **est})
        print(f"eps={eps:g}: counts {s.counts}  slope {fmt(est['slope']) if est['slope'] is not None else 'n/a'}")
    _write_json(out / "survey.json", {"config": cfg, "surveys": summary})
    (out / "survey.dat").write_text(dimension_lab.gnuplot_data(surveys))
    (out / "survey.gp").write_text(dimension_lab.gnuplot_script("survey.dat", surveys))
    return EXIT_OK


HANDLERS = {
    ("field", "info"): cmd_field_info,
    ("bad", "constant"): cmd_bad_constant,
    ("boxes", "dump"): cmd_boxes_dump,
    ("game", "run"): cmd_game_run,
    ("game", "replay"): cmd_game_replay,
    ("orbit", "profile"): cmd_orbit_profile,
    ("dim", "survey"): cmd_dim_survey,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] in ("-h", "--help"):
            build_parser().print_help()
            return EXIT_OK
        _check_command(argv)
    except _Usage as exc:
        print(f"unknown subcommand: {exc}" if str(exc) else "missing subcommand", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return EXIT_USAGE
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = _resolve(args)
        return HANDLERS[(args.group, args.action)](cfg)
    except (ConfigError, ValueError) as exc:
        print(json.dumps({"error": "invalid_config", "detail": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except (IllegalMove, AssertionError, BadflowError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())

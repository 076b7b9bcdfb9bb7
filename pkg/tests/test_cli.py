import json

import pytest

from badflow.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_unknown_subcommand(capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 64 and "usage" in err
    code, _, _ = run(capsys, "field", "explode")
    assert code == 64
    assert run(capsys)[0] == 64


def test_field_info(capsys, tmp_path):
    code, out, _ = run(capsys, "field", "info", "--D", "1", "--out", str(tmp_path))
    assert code == 0
    assert "degree: 2" in out and "D_K: -4" in out
    data = json.loads((tmp_path / "field.json").read_text())
    assert data["discriminant"] == -4 and len(data["embedding_matrix"]) == 2


def test_invalid_config(capsys, tmp_path):
    code, _, err = run(capsys, "field", "info", "--D", "4", "--out", str(tmp_path))
    assert code == 2 and "invalid_config" in err
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert run(capsys, "field", "info", "--config", str(cfg), "--out", str(tmp_path))[0] == 2


def test_config_file_overrides_flags(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"field_D": 3}))
    code, out, _ = run(capsys, "field", "info", "--D", "1", "--config", str(cfg),
                       "--out", str(tmp_path))
    assert code == 0 and "D_K: -3" in out


def test_bad_constant(capsys, tmp_path):
    code, out, _ = run(capsys, "bad", "constant", "--D", "1", "--z", "0.3+0.2j",
                       "--hmax", "400", "--eps", "0.01", "--out", str(tmp_path))
    assert code == 0 and "in Bad_eps" in out
    rep = json.loads((tmp_path / "bad_constant.json").read_text())["report"]
    assert rep["worst_pair"]["quality"] > 0


def test_boxes_dump(capsys, tmp_path):
    code, _, _ = run(capsys, "boxes", "dump", "--D", "1", "--z", "0.5+0.5j", "--qmax", "3",
                     "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "boxes.csv").read_text().splitlines()
    assert lines[1].startswith("p,q,center_re0")
    assert any(line.startswith("1 1,2 0,") for line in lines[2:])


def test_dim_survey_rows_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, _, _ = run(capsys, "dim", "survey", "--D", "1", "--eps", "0.05", "--levels", "3:8",
                         "--out", str(d))
        assert code == 0
    text = (a / "survey_eps0.05.csv").read_bytes()
    assert text == (b / "survey_eps0.05.csv").read_bytes()
    rows = text.decode().splitlines()[2:]
    assert len(rows) == 6
    assert (a / "survey.gp").exists() and (a / "survey.dat").exists()


def test_orbit_profile(capsys, tmp_path):
    args = ["orbit", "profile", "--D", "1", "--z", "0.5+0.5j", "--horizon", "10",
            "--steps", "21"]
    code, out, _ = run(capsys, *args, "--out", str(tmp_path / "a"))
    assert code == 0 and "Escaping" in out
    run(capsys, *args, "--out", str(tmp_path / "b"))
    first = (tmp_path / "a" / "profile.csv").read_bytes()
    assert first == (tmp_path / "b" / "profile.csv").read_bytes()
    assert first.decode().splitlines()[1] == "t,lambda1,exact_flag"
    verdict = json.loads((tmp_path / "a" / "verdict.json").read_text())
    assert verdict["verdict"] == "Escaping" and verdict["horizon"] == 10


def test_game_run_and_replay(capsys, tmp_path):
    code, out, _ = run(capsys, "game", "run", "--D", "1", "--rounds", "20", "--seed", "2",
                       "--out", str(tmp_path))
    assert code == 0 and "audit: ok" in out
    path = tmp_path / "transcript.json"
    code, out, _ = run(capsys, "game", "replay", str(path))
    assert code == 0
    assert "audit: ok" in out and "re-simulation identical: True" in out

    obj = json.loads(path.read_text())
    obj["rounds"][5]["ball"]["radius"] = "1e-30"
    bad = tmp_path / "tampered.json"
    bad.write_text(json.dumps(obj))
    code, out, _ = run(capsys, "game", "replay", str(bad))
    assert code == 3 and "FAILED" in out


def test_replay_missing_file(capsys, tmp_path):
    assert run(capsys, "game", "replay", str(tmp_path / "nope.json"))[0] == 2


@pytest.mark.parametrize("argv", [["--help"], ["dim", "survey", "--help"]])
def test_help(capsys, argv):
    assert run(capsys, *argv)[0] == 0

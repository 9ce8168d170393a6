import json

import pytest

from smallcap.cli import main
from smallcap.report import reports_from_csv, reports_from_json


def run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


def test_moments(tmp_path):
    assert run(tmp_path, "moments", "--N", "4", "8") == 0
    reps = reports_from_json((tmp_path / "moments.json").read_text())
    assert len(reps) == 4 and all(r.passed for r in reps)


def test_eval_writes_field(tmp_path):
    assert run(tmp_path, "eval", "--N", "4", "--R", "8") == 0
    assert (tmp_path / "field_N4_R8.c8").stat().st_size == 32 * 32 * 8
    assert json.loads((tmp_path / "field_N4_R8.c8.json").read_text())["shape"] == [32, 32]


def test_levelsets(tmp_path):
    assert run(tmp_path, "levelsets", "--N", "8", "--s", "1.5") == 0
    assert (tmp_path / "levelsets_N8_s1.5.csv").read_text().startswith("alpha,area,boundary_budget")


def test_majorarcs_with_oracle(tmp_path):
    assert run(tmp_path, "majorarcs", "--N", "8", "27", "--oracle") == 0
    reps = reports_from_csv((tmp_path / "majorarcs.csv").read_text())
    assert {r.name for r in reps} == {"arc_amplitude", "arc_disjoint", "arc_enumeration"}
    assert len((tmp_path / "arcs_N8.csv").read_text().splitlines()) == 11


def test_bilinear_counting(tmp_path):
    assert run(tmp_path, "bilinear", "--S", "16", "64", "--audit-S") == 0
    assert (tmp_path / "quadruples_S64.csv").exists()


def test_highlow_single_cap(tmp_path):
    assert run(tmp_path, "highlow", "--field", "single_cap", "--R", "256") == 0


def test_sweep_and_lqlp_from_config(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("N = 8 16\ns = 1 2\nR = 256\nfamilies = constructive\np = 6\nq = 2\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path), "sweep"]) == 0
    assert main(["--config", str(cfg), "--out", str(tmp_path), "lqlp"]) == 0
    assert (tmp_path / "sweep.csv").exists() and (tmp_path / "lqlp.json").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["--config", str(bad), "--out", str(tmp_path), "sweep"]) == 2
    assert main(["--config", str(tmp_path / "missing.cfg"), "sweep"]) == 2
    bad.write_text('{"p": [6], "q": [Infinity]}')
    assert main(["--config", str(bad), "sweep"]) == 2
    assert "error:" in capsys.readouterr().err


def test_threads_do_not_change_output(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("N = 8 16\ns = 1.5 2\n")
    for t in ("1", "4"):
        assert main(["--config", str(cfg), "--out", str(tmp_path / t), "--threads", t, "sweep"]) == 0
    for name in ("sweep.json", "sweep.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "4" / name).read_bytes()


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])

import json
import os
import subprocess
import sys
from dataclasses import replace

import pytest

from qls_ground.cli import emit_config, main, parse_config, run
from qls_ground.errors import ConfigError

MINIMAL = "dim=3\nalpha=2\nbeta=2\nL=6\nM=24\nboundary=zero\nA.kind=constant\nA.base=1\nA.floor=1\nB.kind=constant\nB.base=1\nB.floor=1"

LINE = MINIMAL.replace("dim=3", "dim=1").replace("L=6", "L=8").replace("M=24", "M=128")

WAVY = LINE.replace(
    "A.kind=constant\nA.base=1\nA.floor=1",
    "A.kind=cosine_sum\nA.base=2\nA.floor=1\nA.terms=0.1,0,1\nA.periods=1",
)


def test_minimal_config_is_valid():
    cfg = parse_config(MINIMAL)
    assert cfg.problem.dim == 3 and cfg.problem.grid.points_per_dim == 24
    assert cfg.problem.potential_A.kind == "constant"
    assert cfg.seed == 0 and not cfg.emit_fields and not cfg.validate_potentials


def test_exponent_sum_above_the_critical_value_is_rejected_with_the_rule():
    text = MINIMAL.replace("alpha=2", "alpha=5").replace("beta=2", "beta=8")
    with pytest.raises(ConfigError, match=r"4N/\(N-2\)"):
        parse_config(text)


def test_alpha_one_is_rejected():
    with pytest.raises(ConfigError, match="alpha > 1"):
        parse_config(MINIMAL.replace("alpha=2", "alpha=1"))


@pytest.mark.parametrize(
    "extra,line,fragment",
    [("colour=blue", 13, "unknown key"), ("no equals sign", 13, "key=value"), ("dim=2", 13, "duplicate")],
)
def test_syntax_problems_carry_the_line(extra, line, fragment):
    with pytest.raises(ConfigError, match=fragment) as info:
        parse_config(MINIMAL + "\n" + extra)
    assert str(info.value).startswith(f"line {line}:")


def test_missing_key_is_reported():
    with pytest.raises(ConfigError, match="boundary"):
        parse_config(MINIMAL.replace("boundary=zero\n", ""))


def test_comments_and_blank_lines_are_ignored():
    cfg = parse_config("# header\n\n" + MINIMAL.replace("\n", "\n\n"))
    assert cfg.problem.alpha == 2.0


def test_trailing_comments_are_stripped():
    cfg = parse_config(MINIMAL.replace("alpha=2", "alpha=2   # exponent of u"))
    assert cfg.problem.alpha == 2.0


def test_emit_then_parse_is_the_identity():
    cfg = parse_config(WAVY + "\nseed=7\nsolve.max_iters=123\nemit_fields=true")
    again = parse_config(emit_config(cfg))
    assert again.problem == cfg.problem and again.solve == cfg.solve
    assert again.emit_fields and emit_config(again) == emit_config(cfg)


def test_bad_potential_term_is_a_config_error():
    with pytest.raises(ConfigError, match="A.terms"):
        parse_config(WAVY.replace("A.terms=0.1,0,1", "A.terms=0.1,0"))


def test_minimal_run_converges(tmp_path):
    cfg = replace(parse_config(MINIMAL + "\nemit_fields=true"), outputs=str(tmp_path / "out"))
    assert run(cfg, log=open(os.devnull, "w")) == 0
    out = tmp_path / "out"
    rep = json.loads((out / "report.json").read_text())
    assert rep["converged"] is True and rep["m_estimate"] > 0
    for name in ("config.txt", "trace.csv", "u.csv", "v.csv", "u.bin", "v.bin", "u.bin.json"):
        assert (out / name).exists()


def test_failed_validation_stops_before_solving(tmp_path):
    cfg = replace(parse_config(WAVY + "\nvalidate_potentials=true"), outputs=str(tmp_path))
    assert run(cfg, log=open(os.devnull, "w")) == 1
    rep = json.loads((tmp_path / "report.json").read_text())
    assert "concavity" in rep["error"]
    assert not (tmp_path / "trace.csv").exists()


def test_unwritable_output_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    cfg = replace(parse_config(LINE), outputs=str(blocker / "out"))
    assert run(cfg, log=open(os.devnull, "w")) == 1


def test_runs_are_reproducible(tmp_path):
    cfg = parse_config(LINE + "\nseed=3")
    a = replace(cfg, outputs=str(tmp_path / "a"))
    b = replace(cfg, outputs=str(tmp_path / "b"))
    devnull = open(os.devnull, "w")
    assert run(a, log=devnull) == run(b, log=devnull) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_solve_stops_at_iteration_budget(tmp_path):
    cfg = replace(parse_config(LINE + "\nsolve.max_iters=3"), outputs=str(tmp_path))
    assert run(cfg, log=open(os.devnull, "w")) == 2
    assert json.loads((tmp_path / "report.json").read_text())["iterations"] == 3


def test_command_line_subcommands(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text(WAVY + "\nemit_fields=true")
    out = tmp_path / "out"
    assert main(["solve", str(conf), "--out", str(out), "--seed", "2"]) == 0
    assert "seed=2" in (out / "config.txt").read_text()
    capsys.readouterr()
    assert main(["validate", str(conf)]) == 1
    checks = json.loads(capsys.readouterr().out)
    assert checks["B"]["ok"] and not checks["A"]["ok"]
    state = f"{out / 'u.bin'},{out / 'v.bin'}"
    assert main(["fiber", str(conf), "--state", state]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["t_bar"] == pytest.approx(1.0, abs=5e-2)


def test_command_line_config_errors_exit_one(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text(MINIMAL.replace("alpha=2", "alpha=1"))
    assert main(["validate", str(conf)]) == 1
    assert main(["solve", str(tmp_path / "missing.conf")]) == 1


def test_module_entry_point_prints_help():
    proc = subprocess.run(
        [sys.executable, "-m", "qls_ground.cli", "--help"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and "solve" in proc.stdout

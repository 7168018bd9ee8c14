import csv
import filecmp
import json
import os
import subprocess
import sys

import pytest

from hyperhelm.cli import main
from hyperhelm.config import KEYS, KINDS, load_config, parse_config, parse_profile
from hyperhelm.errors import ConfigError, MissingArtifact
from hyperhelm.harness import emit_plot_data, run, run_text
from hyperhelm.model import ExpProfile

SOLVE = """
kind = solve
geometry = hyperbolic
dim = 3
lambda = 2.0   # V = 5
r_max = 30
"""


def test_parse_config_values():
    cfg = parse_config(SOLVE)
    assert cfg.kind == "solve" and cfg.get("r_max") == 30.0 and cfg.get("tol") == 1e-10
    assert cfg.coefficients().V_inf == pytest.approx(5.0)
    assert cfg.experiment_id == parse_config(SOLVE).experiment_id
    assert set(cfg.echo()) == {"kind", "geometry", "dim", "lambda", "r_max"}


@pytest.mark.parametrize("text,line,field", [
    ("kind = solve\nbogus = 1\n", 2, "bogus"),
    ("kind = solve\ndim = 3\ndim = 4\n", 3, "dim"),
    ("kind = solve\ndim = three\n", 2, "dim"),
    ("kind = solve\nr_max =\n", 2, "r_max"),
    ("kind = solve\njust words\n", 2, None),
])
def test_config_errors_locate_entry(text, line, field):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert ei.value.line == line and ei.value.field == field
    assert f"line {line}" in str(ei.value)


def test_kind_mismatch_and_missing():
    with pytest.raises(ConfigError):
        parse_config("kind = solve\n", kind="green")
    with pytest.raises(ConfigError):
        parse_config("dim = 3\n")
    with pytest.raises(ConfigError):
        parse_config("geometry = sphere\n", kind="solve").geometry()


def test_every_kind_and_key_documented():
    assert set(KINDS) == {"solve", "energy", "zeros", "green", "resolvent", "smallsol",
                          "dualvar", "strichartz", "sweep"}
    for key, (typ, _default, doc) in KEYS.items():
        assert doc and typ in (str, int, float, list)


def test_profiles(tmp_path):
    assert parse_profile("exp:2,1,0.5") == ExpProfile(2.0, 1.0, 0.5)
    assert parse_profile("3").limit == 3.0
    (tmp_path / "v.csv").write_text("r,value\n0,3\n5,2\n")
    assert parse_profile("table:v.csv", str(tmp_path)).limit == 2.0
    with pytest.raises(ConfigError):
        parse_profile("exp:1", field_name="V")
    with pytest.raises(ConfigError):
        parse_profile("spline:1")


def test_load_config(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text(SOLVE)
    assert load_config(str(p)).kind == "solve"
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_solve_run_and_determinism(tmp_path):
    rep, code = run(parse_config(SOLVE), str(tmp_path / "a"))
    assert code == 0 and rep["status"] == "pass"
    names = {c["name"] for c in rep["checks"]}
    assert {"ode residual", "zero spacing", "closed form"} <= names
    for c in rep["checks"]:
        assert set(c) == {"name", "pass", "value", "tolerance", "location"}
    run(parse_config(SOLVE), str(tmp_path / "b"))
    assert filecmp.cmp(tmp_path / "a" / "solution.csv", tmp_path / "b" / "solution.csv",
                       shallow=False)
    on_disk = json.loads((tmp_path / "a" / "report.json").read_text(encoding="utf-8"))
    assert on_disk["experiment_id"] == rep["experiment_id"]
    text = (tmp_path / "a" / "report.json").read_text()
    assert text.index('"artifacts"') < text.index('"checks"')  # stable key order


def test_h2_violation_aborts(tmp_path):
    rep, code = run_text("kind = solve\nV = const:0.9\n", str(tmp_path))
    assert code == 2 and "H2" in rep["error"]
    assert not os.path.exists(tmp_path / "solution.csv")
    assert (tmp_path / "report.json").exists()


def test_config_error_still_reports(tmp_path):
    rep, code = run_text("kind = solve\nwat = 1\n", str(tmp_path))
    assert code == 2 and rep["error_line"] == 2 and rep["error_field"] == "wat"
    assert json.loads((tmp_path / "report.json").read_text())["status"] == "error"


def test_failing_check_gives_exit_1(tmp_path):
    rep, code = run_text(SOLVE + "spacing_tol = 1e-30\n", str(tmp_path))
    assert code == 1 and rep["status"] == "fail"


def test_emit_plot_data(tmp_path):
    rep, _ = run(parse_config(SOLVE), str(tmp_path))
    out = emit_plot_data(rep, ("r", "u"), str(tmp_path / "ru.csv"))
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["r", "u"] and len(rows) == 3002
    src = list(csv.reader(open(tmp_path / "solution.csv")))
    assert rows[5] == src[5][:2]
    with pytest.raises(MissingArtifact):
        emit_plot_data(rep, "R,norm", str(tmp_path / "x.csv"))
    os.remove(tmp_path / "solution.csv")
    with pytest.raises(MissingArtifact):
        emit_plot_data(rep, "r,u", str(tmp_path / "y.csv"))


def test_energy_ratio_series(tmp_path):
    text = SOLVE.replace("kind = solve", "kind = energy")
    rep, code = run_text(text, str(tmp_path))
    assert code == 0
    emit_plot_data(rep, "r,ratio", str(tmp_path / "ratio.csv"))
    assert open(tmp_path / "ratio.csv").readline().strip() == "r,ratio"


def test_strichartz_series(tmp_path):
    text = ("kind = strichartz\ndim = 3\nlambda = 1\nexponents = 2, 3\nR_cap = 60\n")
    rep, code = run_text(text, str(tmp_path))
    assert code == 0 and rep["results"]["threshold"] == 2.0
    emit_plot_data(rep, "R,norm", str(tmp_path / "growth.csv"), artifact="norm_r2")
    assert len(open(tmp_path / "growth.csv").readlines()) == 7


def test_green_even_limit(tmp_path):
    rep, code = run_text("kind = green\ndim = 2\nlambda = 1\nt_count = 10\nt_max = 5\n",
                         str(tmp_path))
    assert code == 0
    assert open(tmp_path / "green.csv").readline().strip() == "t,ReG,ImG"


SWEEP = """
kind = sweep
dim = 3
V = const:5
Gamma = const:1
r_max = 30
gammas = 0.01, 0.1
ps = 3
"""


def test_sweep_serial_equals_parallel(tmp_path):
    a, ca = run_text(SWEEP, str(tmp_path / "a"), jobs=1)
    b, cb = run_text(SWEEP, str(tmp_path / "b"), jobs=2)
    assert ca == cb == 0
    assert filecmp.cmp(tmp_path / "a" / "sweep.csv", tmp_path / "b" / "sweep.csv", shallow=False)
    assert a["results"]["points"] == b["results"]["points"]


def test_cli_main(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SOLVE)
    code = main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o"), "--series", "r,du"])
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS" in out and (tmp_path / "o" / "plot_r_du.csv").exists()


def test_cli_seed_override(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SOLVE)
    rep, _ = run(parse_config(SOLVE), str(tmp_path / "o"), seed=7)
    assert rep["config"]["seed"] == 7


def test_cli_module_entry(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("kind = solve\nV = const:0.5\n")
    proc = subprocess.run([sys.executable, "-m", "hyperhelm", "solve", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 2 and "H2 violated" in proc.stderr

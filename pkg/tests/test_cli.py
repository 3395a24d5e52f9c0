import json
import subprocess
import sys

import pytest

from bvtrace.cli import ResultRecord, main, parse_config
from bvtrace.errors import ConfigError

CONFIGS = {
    "exact": "command=exact\ndomain=ball\nN=2\nR=1\n",
    "asymptotics": "[asymptotics]\nkappa=2\neps=0.2,0.1,0.05\n",
    "solve-p": "command=solve-p\ndomain=ball\nR=1\nh=0.1\np=2\n",
    "sweep-p": "[sweep-p]\ndomain=ball\nR=1\nh=0.1\np_schedule=2,1.5,1.25,1.1\n",
    "eigenset-search": "[eigenset-search]\ndomain=square_with_appendage\ndelta=0.01\neta=0.5\nbudget=500\nseed=3\n",
    "hole-search": "[hole-search]\ndomain=ball\nR=0.5\nalpha=0.0785\ngood_point=0.5,0\nhole_radius=0.2\nbudget=300\n",
    "shape-derivative": "command=shape-derivative\ndomain=ball\nR=1\nfield=dilation\n",
    "fd-check": "command=fd-check\ndomain=unit_square\nfield=polynomial\ncoefficients=0:2:1:1.0,1:0:3:0.5\ndelta_fd=0.001\n",
}


def _run(tmp_path, text, name="run", extra=()):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(text)
    out = tmp_path / name
    code = main(["--config", str(cfg), "--out", str(out), "--quiet", *extra])
    return code, out


def test_parse_valid_and_echo():
    cfg = parse_config("command=exact\ndomain=ball\nN=2\nR=1")
    assert cfg.command == "exact" and cfg.seed == 0
    assert cfg.echo() == {"command": "exact", "seed": 0, "N": 2, "R": 1.0, "domain": "ball"}


@pytest.mark.parametrize("text,msg", [
    ("command=exact\ndomain=ball\nN=2", "missing R"),
    ("command=solve-p\ndomain=ball\nR=1\nh=0.1\np=0.9", "p must exceed 1"),
    ("command=exact\ndomain=ball\nR=1\ncolour=red", "unknown key"),
    ("command=exact\ndomain=ball\nR=one", "bad value"),
    ("command=exact\ndomain=ball\nR=1\nR=2", "duplicate"),
    ("command=launch", "unknown command"),
    ("domain=ball", "missing command"),
    ("[exact]\ncommand=sweep-p", "does not match"),
    ("command=exact\ndomain=ball\nR=1\nN=2.5", "bad value"),
    ("command=sweep-p\ndomain=ball\nR=1\nh=0.1\np_schedule=2,1.5", "p_schedule"),
    ("command=shape-derivative\ndomain=ball\nR=1\nfield=swirl", "unknown field"),
    ("command=exact\ndomain=ball\nR=1\nnonsense line", "line 4"),
])
def test_parse_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_exact_command(tmp_path):
    code, out = _run(tmp_path, CONFIGS["exact"])
    assert code == 0
    rec = ResultRecord.from_json((out / "result.json").read_text())
    assert rec.payload["lambda1"] == 0.5
    assert rec.config == parse_config(CONFIGS["exact"]).echo()
    assert not list(out.glob("*.svg"))
    assert json.loads((out / "timing.json").read_text())["wall_time_s"] >= 0


def test_sweep_command(tmp_path):
    code, out = _run(tmp_path, CONFIGS["sweep-p"])
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "p,lambda,iterations,extrapolated_lambda1" and len(rows) == 5
    assert "extrapolated_lambda1" in json.loads((out / "result.json").read_text())["result"]
    assert (out / "sweep.svg").read_text().startswith("<?xml")


def test_unknown_command_exit_2_no_files(tmp_path):
    code, out = _run(tmp_path, "command=launch\n")
    assert code == 2
    assert not out.exists()


def test_missing_config_file_exit_2(tmp_path):
    assert main(["--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    code, out = _run(tmp_path, "command=solve-p\ndomain=ball\nR=1\nh=0.1\np=1.5\nmax_iter=1\ntol=1e-15\n")
    assert code == 3 and not out.exists()
    code, _ = _run(tmp_path, "[hole-search]\ndomain=ball\nR=1\nalpha=0.1\ngood_point=1,0\nbudget=50\n", "hs")
    assert code == 3


@pytest.mark.parametrize("command", sorted(CONFIGS))
def test_determinism(tmp_path, command):
    _, a = _run(tmp_path, CONFIGS[command], "a")
    _, b = _run(tmp_path, CONFIGS[command], "b")
    files = sorted(p.name for p in a.iterdir() if p.name != "timing.json")
    assert files == sorted(p.name for p in b.iterdir() if p.name != "timing.json")
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_seed_override(tmp_path):
    _, out = _run(tmp_path, CONFIGS["eigenset-search"], extra=("--seed", "11"))
    assert json.loads((out / "result.json").read_text())["config"]["seed"] == 11


def test_record_round_trip(tmp_path):
    _, out = _run(tmp_path, CONFIGS["fd-check"])
    text = (out / "result.json").read_text()
    assert ResultRecord.from_json(text).to_json() == text
    res = json.loads(text)["result"]
    assert set(res["terms"]) == {"interior", "trace", "transport"}
    assert set(res["fd_check"]) >= {"delta", "central_diff", "gap"}


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(CONFIGS["exact"])
    p = subprocess.run([sys.executable, "-m", "bvtrace", "--config", str(cfg), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert p.returncode == 0
    assert (tmp_path / "o" / "result.json").exists()

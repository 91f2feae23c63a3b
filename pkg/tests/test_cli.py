import json
import subprocess
import sys

import pytest

from bridgelab import cli
from bridgelab.cli import ConfigError, main, parse_config

POINT = {"kind": "point_mass", "atoms": [[1.0, 1.0]]}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def _read_csv(path):
    lines = open(path).read().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


def test_amse_row(tmp_path):
    cfg = _write(tmp_path, {"dist": POINT, "q_grid": [2], "delta_grid": [2], "sigma_w_grid": [0.1]})
    out = str(tmp_path / "a.csv")
    assert main(["amse", "--config", cfg, "--out", out]) == 0
    rows = _read_csv(out)
    assert len(rows) == 1
    assert float(rows[0]["amse"]) == pytest.approx(0.0192446, abs=1e-6)
    assert open(out).readline().strip() == "q,delta,sigma_w,scaled,sigma_bar,chi_star,amse,iterations,residual"
    man = json.load(open(out + ".manifest.json"))
    assert man["failures"] == [] and man["version"] and man["wall_time_s"] >= 0


def test_manifest_echo_reruns_identically(tmp_path):
    cfg = _write(tmp_path, {"dist": POINT, "q_grid": [1.5, 2], "delta_grid": [2], "sigma_w_grid": [0.1, 0.2]})
    out1, out2 = str(tmp_path / "1.csv"), str(tmp_path / "2.csv")
    assert main(["amse", "--config", cfg, "--out", out1, "--threads", "2"]) == 0
    echo = json.load(open(out1 + ".manifest.json"))["config"]
    cfg2 = _write(tmp_path, echo, "echo.json")
    assert main(["amse", "--config", cfg2, "--out", out2, "--threads", "1"]) == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()


def test_qstar_summary(tmp_path, capsys):
    cfg = _write(tmp_path, {"dist": {"kind": "uniform", "theta": 1.0}})
    out = str(tmp_path / "q.csv")
    assert main(["qstar", "--config", cfg, "--out", out]) == 0
    assert "q_star=2.000" in capsys.readouterr().out
    assert len(_read_csv(out)) == 200


def test_prox_selftest():
    assert main(["prox-selftest"]) == 0


def test_partial_failure_keeps_rows(tmp_path):
    cfg = _write(tmp_path, {"dist": POINT, "q_grid": [1.5], "delta_grid": [0.8, 2.0], "sigma_w_grid": [0.0]})
    out = str(tmp_path / "f.csv")
    assert main(["amse", "--config", cfg, "--out", out]) == 1
    assert len(_read_csv(out)) == 1
    man = json.load(open(out + ".manifest.json"))
    assert len(man["failures"]) == 1 and man["failures"][0]["params"]["delta"] == 0.8


def test_phase_uses_smallest_noise(tmp_path):
    cfg = _write(tmp_path, {"dist": POINT, "q_grid": [1.5], "delta_grid": [0.5, 2.0], "sigma_w_grid": [0.1, 1e-4]})
    out = str(tmp_path / "p.csv")
    assert main(["phase", "--config", cfg, "--out", out]) == 0
    rows = _read_csv(out)
    assert [float(r["sigma_w"]) for r in rows] == [1e-4, 1e-4]
    assert float(rows[0]["amse"]) > 1e-2 > 1e-6 > float(rows[1]["amse"])


def test_expand(tmp_path):
    cfg = _write(tmp_path, {"dist": POINT, "q_grid": [2], "delta_grid": [2], "sigma_w_grid": [0.05]})
    out = str(tmp_path / "e.csv")
    assert main(["expand", "--config", cfg, "--out", out]) == 0
    row = _read_csv(out)[0]
    assert row["validity"] == "valid"
    assert float(row["residual_ratio"]) == pytest.approx(7.88 / 8, abs=0.01)


def test_expand_large_delta(tmp_path):
    cfg = {"dist": POINT, "q_grid": [2], "delta_grid": [100], "sigma_w_grid": [0.5], "family": "large_delta"}
    out = str(tmp_path / "l.csv")
    assert main(["expand", "--config", _write(tmp_path, cfg), "--out", out]) == 0
    assert float(_read_csv(out)[0]["residual_ratio"]) == pytest.approx(1.0, abs=0.1)


def test_mc_small(tmp_path):
    cfg = {
        "dist": POINT, "q_grid": [2.0], "sigma_w_grid": [0.5], "lambda_grid": [0.01, 0.1, 1.0],
        "mc": {"n": 60, "p": 30, "seeds": [1, 2]},
    }
    out = str(tmp_path / "m.csv")
    assert main(["mc", "--config", _write(tmp_path, cfg), "--out", out, "--threads", "2"]) == 0
    rows = _read_csv(out)
    assert len(rows) == 6 and [r["seed"] for r in rows] == ["1"] * 3 + ["2"] * 3
    first = open(out, "rb").read()
    assert main(["mc", "--config", _write(tmp_path, cfg), "--out", out, "--threads", "1"]) == 0
    assert open(out, "rb").read() == first


@pytest.mark.parametrize(
    "cfg,field",
    [
        ({"dist": POINT, "q_grid": [2.5], "delta_grid": [2], "sigma_w_grid": [0.1]}, "q_grid[0]"),
        ({"dist": POINT, "q_grid": [2], "delta_grid": [2], "sigma_w_grid": [0.1], "solver": {"fp_tol": 0}}, "solver.fp_tol"),
        ({"dist": POINT, "q_grid": [2], "delta_grid": [], "sigma_w_grid": [0.1]}, "delta_grid"),
        ({"dist": {"kind": "nope"}, "q_grid": [2], "delta_grid": [2], "sigma_w_grid": [0.1]}, "dist"),
        ({"dist": POINT, "q_grid": [2], "delta_grid": [2], "sigma_w_grid": [0.1], "colour": 1}, "colour"),
        ({"dist": POINT, "q_grid": ["a"], "delta_grid": [2], "sigma_w_grid": [0.1]}, "q_grid[0]"),
        ({"dist": POINT, "q_grid": [2], "delta_grid": [2], "sigma_w_grid": [0.1], "quadrature": {"b_nodes": 2}}, "quadrature.b_nodes"),
    ],
)
def test_bad_configs(cfg, field):
    with pytest.raises(ConfigError) as ei:
        parse_config(cfg, "amse")
    assert ei.value.field == field


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, '{"dist":\n  {"kind": }')
    assert main(["amse", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["amse", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "x.csv")]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "bridgelab", "prox-selftest"], capture_output=True, text=True)
    assert res.returncode == 0 and "ok" in res.stdout


def test_defaults_match_documented_values():
    cfg = cli.ExperimentConfig()
    assert cfg.quadrature.hermite_nodes == 61 and cfg.quadrature.b_nodes == 200
    assert cfg.solver.fp_tol == 1e-12 and cfg.solver.chi_grid_points == 64 and cfg.solver.golden_tol == 1e-10
    assert cfg.mc.fista_tol == 1e-9 and cfg.mc.max_iter == 50000

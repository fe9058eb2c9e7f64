import json

import pytest
from click.testing import CliRunner

from tamegeom.cli import main
from tamegeom.config import ExperimentConfig
from tamegeom.errors import ConfigError


def test_config_round_trip():
    cfg = ExperimentConfig(command="ift-certify", metric_b="polyrand:7:0.05", tol=1e-7,
                           base_points=[[0.1, -0.2], [0.0, 0.3]], seed=5)
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg


@pytest.mark.parametrize("text,field,line", [
    ("[experiment]\ncommand = convex-path\n\n[grid]\ngrid = 1\n", "grid", 5),
    ("[experiment]\nseed = zero\n", "seed", 2),
    ("[metrics]\nmetric_a = flat\ncolour = red\n", "colour", 3),
    ("[tolerances]\n\ntol = -1\n", "tol", 3),
])
def test_config_errors_name_line_and_field(text, field, line):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_text(text)
    assert exc.value.field == field and exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_unknown_section():
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_text("[experiment]\nseed = 1\n[extra]\nx = 1\n")
    assert exc.value.line == 3


def test_replace_ignores_unset_flags():
    cfg = ExperimentConfig(seed=3).replace(seed=None, grid=9)
    assert cfg.seed == 3 and cfg.grid == 9
    with pytest.raises(ConfigError):
        cfg.replace(s_steps=1)


def _run(args, env=None):
    return CliRunner().invoke(main, args, env=env)


def test_curvature_scan_writes_artifacts(tmp_path):
    r = _run(["curvature-scan", "--metric-a", "sphere:1", "--grid", "4", "--out", str(tmp_path)])
    assert r.exit_code == 0, r.output
    for suffix in (".csv", ".json", ".gp", "_timing.json"):
        assert (tmp_path / f"curvature-scan{suffix}").exists()
    data = json.loads((tmp_path / "curvature-scan.json").read_text())
    assert data["passed"]
    assert "norm_R" in (tmp_path / "curvature-scan.csv").read_text().splitlines()[0]
    assert "curvature-scan.csv" in (tmp_path / "curvature-scan.gp").read_text()


def test_outputs_are_deterministic(tmp_path):
    args = ["convex-path", "--metric-a", "flat", "--metric-b", "polyrand:7:0.05", "--grid", "4",
            "--s-steps", "5", "--out", str(tmp_path)]
    names = ("convex-path.csv", "convex-path.json")
    assert _run(args).exit_code == 0
    first = [(tmp_path / n).read_bytes() for n in names]
    assert _run(args).exit_code == 0
    assert first == [(tmp_path / n).read_bytes() for n in names]


def test_failed_check_exit_code(tmp_path):
    r = _run(["convex-path", "--metric-b", "polyrand:7:0.05", "--grid", "3", "--s-steps", "3",
              "--tol", "1e-20", "--out", str(tmp_path)])
    assert r.exit_code == 1
    assert "[FAIL]" in r.output


def test_config_error_exit_code(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nseed = 0\n[grid]\ns_steps = 0\n")
    r = _run(["convex-path", "--config", str(cfg), "--out", str(tmp_path)])
    assert r.exit_code == 2
    assert "line 4" in r.output and "s_steps" in r.output


def test_missing_second_metric(tmp_path):
    r = _run(["convex-path", "--out", str(tmp_path)])
    assert r.exit_code == 2


def test_output_directory_precedence(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[experiment]\nout = {tmp_path / 'from_config'}\n")
    env = {"TAMEGEOM_OUT": str(tmp_path / "from_env")}
    args = ["polar-path", "--config", str(cfg)]
    assert _run(args, env).exit_code == 0
    assert (tmp_path / "from_env" / "polar-path.json").exists()
    assert _run(args + ["--out", str(tmp_path / "from_flag")], env).exit_code == 0
    assert (tmp_path / "from_flag" / "polar-path.json").exists()
    assert _run(args, {"TAMEGEOM_OUT": ""}).exit_code == 0
    assert (tmp_path / "from_config" / "polar-path.json").exists()


def test_polar_path_csv(tmp_path):
    r = _run(["polar-path", "--dim", "4", "--s-steps", "5", "--out", str(tmp_path)])
    assert r.exit_code == 0, r.output
    rows = (tmp_path / "polar-path.csv").read_text().splitlines()
    assert rows[0].startswith("t,i,lambda_measured")
    assert len(rows) == 1 + 5 * 4


def test_inj_estimate_sphere(tmp_path):
    r = _run(["inj-estimate", "--metric-a", "sphere:1", "--metric-b", "sphere:1.2",
              "--out", str(tmp_path)])
    assert r.exit_code == 0, r.output
    data = json.loads((tmp_path / "inj-estimate.json").read_text())
    assert data["passed"]


def test_ift_certify_quadratic(tmp_path):
    r = _run(["ift-certify", "--metric-a", "quadratic-1d", "--out", str(tmp_path)])
    assert r.exit_code == 0, r.output


def test_help_lists_commands():
    r = _run(["--help"])
    for name in ("curvature-scan", "convex-path", "inj-estimate", "ift-certify", "polar-path",
                 "all"):
        assert name in r.output

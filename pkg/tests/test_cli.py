import json

import pytest

from subgauss import cli
from subgauss.cli import main, parse_config
from subgauss.errors import ParseError, ValidationError
from subgauss.sweep import SWEEP_HEADER

SIN4 = {"kind": "builtin", "name": "sin4"}


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SUBGAUSS_LAB_THREADS", raising=False)


def _run_dirs(root):
    return sorted(p for p in root.iterdir() if p.is_dir()) if root.exists() else []


def test_defaults_are_filled():
    cfg = parse_config({"spec": SIN4}, command="divergence", base_files=())
    assert cfg.command == "divergence"
    assert cfg.name == "divergence"
    assert cfg.out_dir == "lab_output"
    assert cfg.n == 1
    assert cfg.grid == {"L": 12.0, "points": 16385}
    assert cfg.grid_params.points == 16385


def test_argv_overrides_document():
    cfg = parse_config({"spec": SIN4, "n": 4}, command="density", argv=["--n", "16"], base_files=())
    assert cfg.n == 16
    # trig laws default to the spectral route
    assert cfg.method == "spectral"


def test_inadmissible_c():
    spec = {"kind": "trig", "a0": 0.375, "cos": [[2, -0.5], [4, 0.125]], "c": 1.0}
    with pytest.raises(ValidationError, match="c_max"):
        parse_config({"spec": spec}, command="construct", base_files=())


def test_unknown_key_suggests_the_closest():
    with pytest.raises(ParseError, match="alphas"):
        parse_config({"spec": SIN4, "alpha": [2.0]}, command="divergence", base_files=())
    with pytest.raises(ParseError):
        parse_config({"spec": SIN4}, command="divergence", argv=["--grid.step", "0.1"], base_files=())


def test_malformed_json():
    with pytest.raises(ParseError, match="line 1"):
        parse_config('{"spec": ', command="construct", base_files=())


def test_violations_are_collected():
    with pytest.raises(ValidationError) as info:
        parse_config({"spec": SIN4, "n": 0, "n_list": [64, 32]}, command="sweep", base_files=())
    assert "n must be ≥ 1" in info.value.violations
    assert "n_list must be increasing" in info.value.violations


def test_round_trip():
    cfg = parse_config({"spec": SIN4, "n_list": [16, 32]}, command="sweep", base_files=())
    assert parse_config(cfg.to_dict(), base_files=()) == cfg


def test_zero_n_exits_with_config_code(tmp_path):
    assert main(["density", "--config", json.dumps({"spec": SIN4}), "--n", "0", "--out", str(tmp_path / "out")]) == 2
    assert _run_dirs(tmp_path / "out") == []


def test_diagnose_run(tmp_path):
    out = tmp_path / "out"
    doc = {"spec": {"kind": "builtin", "name": "sin4_root_pi6"}}
    assert main(["diagnose", "--config", json.dumps(doc), "--out", str(out)]) == 0
    (run,) = _run_dirs(out)
    assert run.name.endswith("_diagnose")
    report = json.loads((run / "diagnostics.json").read_text())
    assert report["predicted_clt"] is False
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["command"] == "diagnose"
    assert manifest["threads"] == 1
    assert (run / "log.txt").exists()


def test_failed_run_leaves_no_output(tmp_path):
    out = tmp_path / "out"
    doc = {"spec": {"kind": "uniform"}, "method": "spectral", "n": 2}
    assert main(["density", "--config", json.dumps(doc), "--out", str(out)]) == 1
    assert _run_dirs(out) == []


def test_sweep_run(tmp_path):
    out = tmp_path / "out"
    doc = {"spec": SIN4, "n_list": [16, 32, 64]}
    assert main(["sweep", "--config", json.dumps(doc), "--out", str(out), "--threads", "2"]) == 0
    (run,) = _run_dirs(out)
    lines = (run / "sweep.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert len(lines) == 4
    assert json.loads((run / "sweep.json").read_text())["predicted_clt"] is True


def test_config_file(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"command": "construct", "spec": SIN4, "name": "sin4_construct"}))
    out = tmp_path / "out"
    assert main(["construct", "--config", str(path), "--out", str(out)]) == 0
    (run,) = _run_dirs(out)
    assert run.name.endswith("_sin4_construct")
    for name in ("spec.json", "coefficients.csv", "density.csv", "profile.csv", "manifest.json"):
        assert (run / name).exists()


def test_show(tmp_path):
    assert main(["llt", "--config", json.dumps({"spec": SIN4}), "--show", "--out", str(tmp_path / "out")]) == 0
    assert _run_dirs(tmp_path / "out") == []


def test_unexpected_error_cleans_up(tmp_path, monkeypatch):
    def boom(spec, cfg, out_dir):
        (out_dir / "partial.csv").write_text("n,T_inf\n")
        raise ZeroDivisionError("float division by zero")

    monkeypatch.setitem(cli.RUNNERS, "diagnose", boom)
    out = tmp_path / "out"
    assert main(["diagnose", "--config", json.dumps({"spec": SIN4}), "--out", str(out)]) == 1
    assert _run_dirs(out) == []


def test_formats_select_outputs(tmp_path):
    out = tmp_path / "out"
    doc = {"spec": SIN4, "n_list": [16, 32, 64], "formats": ["csv"]}
    assert main(["sweep", "--config", json.dumps(doc), "--out", str(out)]) == 0
    (run,) = _run_dirs(out)
    assert (run / "sweep.csv").exists()
    assert not (run / "sweep.json").exists()
    # the manifest is written regardless
    assert (run / "manifest.json").exists()


def test_unknown_format_is_rejected():
    with pytest.raises(ValidationError) as info:
        parse_config({"spec": SIN4, "formats": ["parquet"]}, command="sweep", base_files=())
    assert any("formats" in v for v in info.value.violations)


def test_llt_uses_configured_samples(tmp_path):
    out = tmp_path / "out"
    doc = {"spec": SIN4, "n_list": [16, 32, 64], "tilt_n": [64], "x_samples": [0.0, 0.1]}
    assert main(["llt", "--config", json.dumps(doc), "--out", str(out)]) == 0
    (run,) = _run_dirs(out)
    lines = (run / "llt_residuals.csv").read_text().splitlines()
    assert [float(line.split(",")[1]) for line in lines[1:]] == [0.0, 0.1]

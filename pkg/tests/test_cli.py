import json
import subprocess
import sys

import pytest

from tikhonov_pd import experiments as ex
from tikhonov_pd.cli import apply_override, main
from tikhonov_pd.errors import ConfigError

SHORT = {"t_start": 1.0, "t_end": 10.0, "samples": 40}


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def slow_config(tmp_path):
    cfg = ex.preset_config("example1_slow")
    cfg["integration"] = dict(SHORT)
    return write_config(tmp_path / "example1_slow.json", cfg)


def _summary_without_runtime(path):
    data = json.loads(path.read_text())
    data.pop("runtime_seconds")
    return data


def test_run_writes_outputs(slow_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(slow_config), "--out", str(out)]) == 0
    csv = (out / "example1_slow.csv").read_text().splitlines()
    assert csv[0] == "t,gap,obj_err,feas,vel_norm,grad_dev,dist_min_norm,energy_E,energy_tilde,energy_hat"
    assert len(csv) == 41
    summary = json.loads((out / "example1_slow.summary.json").read_text())
    assert summary["status"] == "ok"
    assert "example1_slow: ok" in capsys.readouterr().out


def test_missing_config_is_a_config_error(tmp_path, capsys):
    missing = tmp_path / "missing.json"
    assert main(["run", "--config", str(missing)]) == 2
    err = capsys.readouterr().err
    assert str(missing) in err and len(err.strip().splitlines()) == 1


def test_invalid_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    assert "bad.json" in capsys.readouterr().err


def test_unknown_override_key_is_rejected(slow_config, tmp_path, capsys):
    code = main(["run", "--config", str(slow_config), "--out", str(tmp_path), "--set", "params.gamma=2"])
    assert code == 2
    assert "params.gamma" in capsys.readouterr().err


def test_override_matches_edited_config(slow_config, tmp_path):
    edited = json.loads(slow_config.read_text())
    edited["params"]["alpha"] = 7
    edited["integration"]["rel_tol"] = 1e-4
    edited_path = write_config(tmp_path / "edited.json", edited)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(slow_config), "--out", str(a),
                 "--set", "params.alpha=7", "--set", "integration.rel_tol=1e-4"]) == 0
    assert main(["run", "--config", str(edited_path), "--out", str(b)]) == 0
    assert _summary_without_runtime(a / "example1_slow.summary.json") == \
        _summary_without_runtime(b / "example1_slow.summary.json")
    assert (a / "example1_slow.csv").read_bytes() == (b / "example1_slow.csv").read_bytes()


def test_step_limit_exits_3_with_partial_outputs(slow_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(slow_config), "--out", str(out), "--set", "integration.max_steps=10"]) == 3
    rows = (out / "example1_slow.csv").read_text().splitlines()
    assert 2 <= len(rows) < 41
    assert "integration failed" in capsys.readouterr().err


def test_presets_listing(tmp_path, capsys):
    assert main(["presets", "--write", str(tmp_path)]) == 0
    assert capsys.readouterr().out.splitlines() == list(ex.PRESETS)
    assert json.loads((tmp_path / "qp_compare.json").read_text()) == ex.preset_config("qp_compare")


def test_written_preset_runs(tmp_path):
    main(["presets", "--write", str(tmp_path)])
    cfg_path = tmp_path / "example1_slow.json"
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--out", str(out),
                 "--set", "integration.t_end=5", "--set", "integration.samples=20"]) == 0
    assert (out / "example1_slow.summary.json").exists()


def test_preset_kind_mismatch(capsys):
    assert main(["sweep", "--preset", "example1_slow"]) == 2
    assert main(["run", "--preset", "nope"]) == 2


def test_sweep_and_compare(tmp_path):
    sweep = ex.preset_config("example1_sweep")
    sweep["base"]["integration"] = dict(SHORT)
    sweep_path = write_config(tmp_path / "sweep.json", sweep)
    assert main(["sweep", "--config", str(sweep_path), "--out", str(tmp_path / "s"),
                 "--set", "r_values=[0.5,3]"]) == 0
    table = (tmp_path / "s" / "example1_sweep_sweep.csv").read_text().splitlines()
    assert len(table) == 3 and table[2].startswith("3,FAST,")

    cmp_cfg = ex.preset_config("qp_compare")
    cmp_cfg["integration"] = dict(SHORT)
    cmp_path = write_config(tmp_path / "cmp.json", cmp_cfg)
    assert main(["compare", "--config", str(cmp_path), "--out", str(tmp_path / "c"),
                 "--set", "systems.1.params.theta=0.25"]) == 0
    header = (tmp_path / "c" / "qp_compare_compare.csv").read_text().splitlines()[0]
    assert header == "t,tikhonov_obj_err,tikhonov_feas,z_avd_obj_err,z_avd_feas"
    assert main(["compare", "--config", str(cmp_path), "--set", "systems.5.params.theta=1"]) == 2


def test_jobs_must_be_positive(slow_config):
    assert main(["run", "--config", str(slow_config), "--jobs", "0"]) == 2


def test_apply_override():
    cfg = {"params": {"alpha": 13}, "systems": [{"params": {"theta": 0.5}}]}
    apply_override(cfg, "params.alpha=7.5")
    apply_override(cfg, "systems.0.params.theta=0.25")
    apply_override(cfg, "name=run1")
    assert cfg == {"params": {"alpha": 7.5}, "systems": [{"params": {"theta": 0.25}}], "name": "run1"}
    with pytest.raises(ConfigError):
        apply_override(cfg, "params.alpha")
    with pytest.raises(ConfigError):
        apply_override(cfg, "params.alpha.deep=1")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tikhonov_pd", "presets"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.split() == list(ex.PRESETS)

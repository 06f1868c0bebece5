import csv
import json

import numpy as np
import pytest

from corr2des.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, compare_runs, main, spectrum_times
from corr2des.config import ConfigError


def tiny_config(**over):
    cfg = {
        "name": "tiny",
        "dimer": {"eps1": 12410, "eps2": 12210, "coupling": 5.5, "mu1": 1.0, "mu2": -0.8, "temperature": 77},
        "bath": {"kind": "power_law", "s": 1.0, "omega_c": 0.05, "coupling": 0.14},
        "dynamics_mode": "correlation_aware",
        "dressing_amplitude": 0.3,
        "grids": {"t1_max": 35, "t1_points": 8, "t3_max": 35, "t3_points": 8,
                  "T_list": {"start": 0, "stop": 70, "step": 10}},
        "integrator": {"dt": 1.0},
    }
    cfg.update(over)
    return cfg


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    conf = root / "tiny.json"
    conf.write_text(json.dumps(tiny_config()))
    out = root / "run"
    assert main(["simulate", "--config", str(conf), "--out", str(out), "--threads", "1"]) == EXIT_OK
    return root, conf, out


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_artifacts_present(tiny_run):
    _, _, out = tiny_run
    for name in ("config.json", "manifest.json", "summary.json", "crosspeak.csv", "crosspeak_mirror.csv",
                 "beating.csv", "ppt.csv", "memory_norm.csv"):
        assert (out / name).is_file(), name
    assert len(list((out / "signals").glob("*.csv"))) == 16
    assert sorted(p.name for p in (out / "spectra").glob("*.csv")) == [
        "absorptive_T0.csv", "absorptive_T10.csv", "absorptive_T40.csv", "absorptive_T70.csv"]


def test_csv_headers_and_precision(tiny_run):
    _, _, out = tiny_run
    assert read(out / "crosspeak.csv")[0] == ["T_fs", "A_CP"]
    assert read(out / "beating.csv")[0] == ["nu_cm1", "magnitude"]
    assert read(out / "ppt.csv")[0] == ["t_fs", "min_eig"]
    assert read(out / "spectra" / "absorptive_T0.csv")[0] == ["w1_cm1", "w3_cm1", "value"]
    assert read(out / "memory_norm.csv")[0] == ["segment", "t_fs", "d_mem_fro", "d_full_fro"]
    _, rows = read(out / "crosspeak.csv")
    assert len(rows) == 8
    value = rows[3][1]
    assert float(value) == float(format(float(value), ".17g"))
    assert len(value.replace("-", "").replace(".", "").split("e")[0]) >= 15


def test_manifest_complete(tiny_run):
    _, _, out = tiny_run
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["failed_stage"] is None
    assert len(man["config_hash"]) == 64
    for stage in ("tables", "sweep", "analysis", "diagnostics", "write"):
        assert man["timings_s"][stage] >= 0
    for cert in ("lambda_sm", "rk4_error_ratio", "trace_drift", "hermiticity_drift"):
        assert cert in man["certificates"]
    listed = set(man["files"])
    on_disk = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()}
    assert listed == on_disk


def test_resolved_config_echo(tiny_run):
    _, _, out = tiny_run
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["bath"]["coupling"] == 0.14
    assert echoed["grids"]["T_list"][-1] == 70.0


def test_rerun_is_deterministic(tiny_run):
    root, conf, out = tiny_run
    again = root / "again"
    assert main(["simulate", "--config", str(conf), "--out", str(again), "--threads", "2"]) == EXIT_OK
    for name in ("crosspeak.csv", "beating.csv", "ppt.csv", "signals/rephasing_T30.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes(), name


def test_compare_self(tiny_run, capsys):
    _, _, out = tiny_run
    table = compare_runs([out, out])
    assert [r["ratio_to_first"] for r in table] == [1.0, 1.0]
    assert table[0]["class"] == table[1]["class"]
    assert main(["compare", str(out), str(out)]) == EXIT_OK
    assert "peak/median" in capsys.readouterr().out


def test_compare_grid_mismatch(tiny_run, tmp_path):
    _, _, out = tiny_run
    conf = tmp_path / "other.json"
    conf.write_text(json.dumps(tiny_config(grids={"t1_max": 35, "t1_points": 8, "t3_max": 35, "t3_points": 8,
                                                  "T_list": {"start": 0, "stop": 80, "step": 10}})))
    other = tmp_path / "other"
    assert main(["simulate", "--config", str(conf), "--out", str(other)]) == EXIT_OK
    with pytest.raises(ConfigError, match="grids.T_list"):
        compare_runs([out, other])
    assert main(["compare", str(out), str(other)]) == EXIT_CONFIG


def test_compare_missing_directory(tmp_path):
    assert main(["compare", str(tmp_path), str(tmp_path)]) == EXIT_CONFIG


def test_dry_run(tmp_path):
    out = tmp_path / "dry"
    assert main(["simulate", "--preset", "fig3", "--out", str(out), "--dry-run"]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "dry-run"
    assert set(man["files"]) == {"config.json", "manifest.json"}


def test_mode_override_in_dry_run(tmp_path):
    out = tmp_path / "dry"
    main(["simulate", "--preset", "fig2", "--mode", "reset", "--variant", "telescoping",
          "--out", str(out), "--dry-run"])
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["dynamics_mode"] == "factorized_reset" and cfg["segment_variant"] == "telescoping"


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimer": {}}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["simulate", "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_numerical_failure_exit(tmp_path):
    # an absurd coupling makes the explicit integrator diverge
    conf = tmp_path / "blow.json"
    conf.write_text(json.dumps(tiny_config(bath={"kind": "power_law", "s": 1.0, "omega_c": 0.05, "coupling": 300.0})))
    out = tmp_path / "blow"
    with np.errstate(all="ignore"):
        code = main(["simulate", "--config", str(conf), "--out", str(out)])
    assert code == EXIT_NUMERICAL
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and man["failed_stage"] == "simulate"


def test_dump_commands(tmp_path):
    conf = tmp_path / "tiny.json"
    conf.write_text(json.dumps(tiny_config()))
    corr = tmp_path / "corr.csv"
    assert main(["dump-correlation", "--config", str(conf), "--out", str(corr)]) == EXIT_OK
    header, rows = read(corr)
    assert header == ["t_fs", "re_C", "im_C"] and float(rows[0][0]) == 0.0
    mem = tmp_path / "mem.csv"
    assert main(["dump-memory-norm", "--config", str(conf), "--out", str(mem)]) == EXIT_OK
    header, rows = read(mem)
    assert {r[0] for r in rows} == {"1", "2", "3"}


def test_spectrum_times():
    assert spectrum_times([0.0, 10.0, 20.0, 30.0, 40.0]) == [0.0, 10.0, 20.0, 40.0]
    assert spectrum_times([0.0, 5.0, 15.0]) == [0.0, 5.0, 15.0]

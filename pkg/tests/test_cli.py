import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from twqfi import cli, config
from twqfi.scenarios import Table, build, run_scenario, write_csv


def write_cfg(tmp_path, body, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(body))
    return str(path)


def small(scenario, **numerics):
    grids = {"opo-undepleted": [0.0, 0.5], "pump-depletion": [0.0, 0.04],
             "kerr": [0.0, 0.03], "flow-field": [0.3]}
    return {"scenario": scenario, "protocol": {"t1": grids[scenario]},
            "numerics": {"n_trajectories": 3000, "seed": 1, **numerics}}


def test_list_names(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("flow-field", "opo-undepleted", "pump-depletion", "kerr"):
        assert name in out
    assert len(out.strip().splitlines()) == 4


def test_list_schema(capsys):
    assert cli.main(["list", "kerr"]) == 0
    out = capsys.readouterr().out
    assert "omega0" in out and "n_cut" in out


def test_unknown_subcommand_exit_code():
    res = subprocess.run([sys.executable, "-m", "twqfi", "frobnicate"], capture_output=True)
    assert res.returncode == 2


@pytest.mark.parametrize("body,match", [
    ({"scenario": "kerr", "model": {"chii": 1.0}}, "chii"),
    ({"scenario": "kerr", "numerics": {"seeds": 1}}, "seeds"),
    ({"scenario": "kerr", "extra": {}}, "extra"),
    ({"scenario": "nope"}, "unknown scenario"),
    ({"model": {}}, "scenario"),
    ({"scenario": "kerr", "model": {"chi": float("inf")}}, "finite"),
    ({"scenario": "kerr", "numerics": {"n_trajectories": 1.5}}, "integer"),
    ({"scenario": "kerr", "protocol": {"t1": {"start": 0, "stop": 1}}}, "start, stop, num"),
])
def test_strict_schema(body, match):
    with pytest.raises(config.ConfigError, match=match):
        config.validate(body)


def test_bad_config_exits_2_before_computing(tmp_path, capsys):
    path = write_cfg(tmp_path, {"scenario": "opo-undepleted", "model": {"gg": 2.0}})
    assert cli.main(["run", path, "--out", str(tmp_path)]) == 2
    assert "gg" in capsys.readouterr().err
    assert not list(tmp_path.glob("*.csv"))
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_grid_mapping_and_defaults():
    cfg = config.validate({"scenario": "kerr", "protocol": {"t1": {"start": 0, "stop": 0.07, "num": 8}}})
    assert len(cfg["protocol"]["t1"]) == 8 and cfg["protocol"]["t1"][-1] == pytest.approx(0.07)
    assert cfg["model"]["omega0"] is None
    _, p = build(cfg, 0.01)
    assert p.preparation.model.omega0 == pytest.approx(16.0)


def test_canonical_configs_validate(configs_dir):
    names = set()
    for path in sorted(configs_dir.glob("*.yaml")):
        names.add(config.load(path)["scenario"])
    assert names == set(config.SCENARIOS)


def test_run_writes_csv_and_manifest(tmp_path):
    path = write_cfg(tmp_path, small("opo-undepleted"))
    assert cli.main(["run", path, "--out", str(tmp_path / "out")]) == 0
    csv = (tmp_path / "out" / "opo-undepleted.csv").read_bytes()
    assert b"\r" not in csv
    header, *rows = csv.decode().strip().split("\n")
    assert header.split(",")[:3] == ["gt1", "qfi_tw", "qfi_tw_stderr"]
    assert len(rows) == 2
    manifest = json.loads((tmp_path / "out" / "opo-undepleted.manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["config"]["scenario"] == "opo-undepleted"
    assert manifest["n_nonfinite_trajectories"] == 0 and manifest["wall_time_s"] > 0
    assert not list((tmp_path / "out").glob(".tmp-*"))


def test_full_precision_floats(tmp_path):
    t = Table(["x"])
    t.add(x=0.1)
    write_csv(tmp_path / "t.csv", t)
    assert (tmp_path / "t.csv").read_text() == "x\n0.10000000000000001\n"


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    path = write_cfg(tmp_path, small("kerr"))
    assert cli.main(["run", path]) == 0
    assert (tmp_path / "env" / "kerr.csv").exists()


def test_byte_identical_across_runs_and_workers(tmp_path):
    path = write_cfg(tmp_path, small("pump-depletion", n_trajectories=20_000))
    outputs = []
    for w in ("1", "3", "1"):
        out = tmp_path / f"w{w}-{len(outputs)}"
        assert cli.main(["run", path, "--workers", w, "--out", str(out)]) == 0
        outputs.append((out / "pump-depletion.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_seed_flag_changes_output(tmp_path):
    path = write_cfg(tmp_path, small("kerr"))
    cli.main(["run", path, "--out", str(tmp_path / "a")])
    cli.main(["run", path, "--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "kerr.csv").read_bytes() != (tmp_path / "b" / "kerr.csv").read_bytes()


def test_kerr_rows_at_zero_time():
    cfg = config.validate(small("kerr", n_trajectories=20_000))
    t = run_scenario(cfg)
    row = dict(zip(t.columns, t.rows[0]))
    assert row["qfi_oracle"] == pytest.approx(2.0, rel=1e-10)
    assert row["mom_inverse_varX"] == pytest.approx(2.0, rel=1e-10)
    assert abs(row["qfi_tw"] - 2.0) < 3 * row["qfi_tw_stderr"]


def test_depletion_conserved_sum_constant():
    cfg = config.validate(small("pump-depletion"))
    s = run_scenario(cfg).column("conserved_sum")
    assert abs(s[1] - s[0]) / s[0] < 1e-9


def test_flow_field_panels():
    cfg = config.validate({**small("flow-field"), "numerics": {"n_trajectories": 2000, "n_points": 50}})
    t = run_scenario(cfg)
    panels = t.column("panel")
    assert [int((panels == p).sum()) for p in ("initial", "prepared", "rewound")] == [50, 50, 50]
    # vacuum: the rotation field at t=0 is tangential and carries no QFI
    assert t.extra["qfi"]["initial"]["value"] < 1e-10
    prepared = t.extra["qfi"]["prepared"]
    assert abs(prepared["value"] - 2 * np.sinh(0.6) ** 2) < 3 * prepared["std_error"]


def test_oracle_subcommand(tmp_path):
    path = write_cfg(tmp_path, small("kerr"))
    assert cli.main(["oracle", path, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "kerr-oracle.csv").read_text().splitlines()
    assert lines[0].startswith("source,chi_t1,qfi")
    assert all(line.startswith("oracle,") for line in lines[1:])
    assert cli.main(["oracle", "flow-field", "--out", str(tmp_path)]) == 2


def test_oracle_truncation_is_numerical_failure(tmp_path, capsys):
    body = small("kerr")
    body["numerics"]["n_cut"] = 20
    assert cli.main(["oracle", write_cfg(tmp_path, body), "--out", str(tmp_path)]) == 1
    assert "chi_t1=0" in capsys.readouterr().err


def test_escape_is_numerical_failure(tmp_path):
    body = small("opo-undepleted")
    body["model"] = {"g": 40.0}
    body["protocol"]["t1"] = [1.0]
    body["protocol"]["prep_step"] = 0.01
    assert cli.main(["run", write_cfg(tmp_path, body), "--out", str(tmp_path)]) == 1


def test_diagnose_passes_and_fails(tmp_path, capsys):
    body = small("opo-undepleted")
    body["protocol"]["t1"] = [1.0]
    assert cli.main(["diagnose", write_cfg(tmp_path, body), "--fd-trajectories", "2000"]) == 0
    out = capsys.readouterr().out
    assert "RK4 order slope" in out and "reversibility" in out and "delta plateau" in out
    body["protocol"]["prep_step"] = 1.0
    assert cli.main(["diagnose", write_cfg(tmp_path, body, "huge.yaml"),
                     "--fd-trajectories", "2000"]) == 1
    assert "FAIL" in capsys.readouterr().out

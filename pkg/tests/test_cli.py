import json
import shutil
from pathlib import Path

import pytest

from elastiq.cli import main
from elastiq.evaluate import METRICS_HEADER

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
DECLARED = ("dataset.csv", "oracle.csv", "synthetic.csv", "estimates.csv", "metrics.json", "metrics.csv",
            "elasticity_series.csv", "bundle/stage1.json", "bundle/stage2.json", "bundle/scaler.json",
            "bundle/config.json")


def write_config(tmp_path, **overrides) -> Path:
    doc = json.loads((CONFIGS / "smoke.json").read_text())
    doc.update(overrides)
    doc.pop("output_dir", None)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def smoke_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    status = main(["pipeline", "--config", str(CONFIGS / "smoke.json"), "--out", str(out)])
    return status, out


def test_smoke_pipeline_produces_every_file(smoke_out):
    status, out = smoke_out
    assert status == 0
    for name in DECLARED:
        assert (out / name).is_file(), name
    assert not (out / "FAILED").exists()
    rows = (out / "metrics.csv").read_text().splitlines()
    assert rows[0] == ",".join(METRICS_HEADER)
    assert [r.split(",")[0] for r in rows[1:]] == ["smlstm", "2snn", "llr", "kfa"]


def test_rerun_is_byte_identical(smoke_out, tmp_path):
    _, out = smoke_out
    assert main(["pipeline", "--config", str(CONFIGS / "smoke.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "metrics.json").read_bytes() == (out / "metrics.json").read_bytes()
    assert (tmp_path / "estimates.csv").read_bytes() == (out / "estimates.csv").read_bytes()


def test_seed_override_changes_the_run(smoke_out, tmp_path):
    _, out = smoke_out
    cfg = write_config(tmp_path, methods=["llr"])
    assert main(["pipeline", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "metrics.json").read_text())
    assert doc["reports"][0]["seed"] == 5
    assert (tmp_path / "o" / "dataset.csv").read_bytes() != (out / "dataset.csv").read_bytes()


def test_missing_scenario_file_names_the_path(tmp_path, capsys):
    cfg = write_config(tmp_path, scenario="nowhere/missing_scenario.json")
    status = main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert status != 0
    err = capsys.readouterr().err
    assert "missing_scenario.json" in err
    marker = (tmp_path / "o" / "FAILED").read_text()
    assert "simulate" in marker and "missing_scenario.json" in marker


def test_missing_config_file(tmp_path, capsys):
    status = main(["pipeline", "--config", str(tmp_path / "absent.json")])
    assert status == 2
    assert "absent.json" in capsys.readouterr().err


def test_unknown_method_is_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, methods=["smlstm", "svr"])
    assert main(["pipeline", "--config", str(cfg)]) == 2
    assert "methods" in capsys.readouterr().err


def test_stage_failure_names_stage_and_keeps_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, methods=["smlstm"],
                       estimator={"eta_th": 1.0, "stage1": {"max_iters": 5}, "stage2": {"max_iters": 5}})
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    marker = (tmp_path / "o" / "FAILED").read_text()
    assert marker.startswith("stage: train")
    assert "no reliable synthetic data" in capsys.readouterr().err
    assert (tmp_path / "o" / "dataset.csv").exists()


def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, methods=["kfa"], output_dir="from_file")
    monkeypatch.setenv("ELASTIQ_OUT", str(tmp_path / "env"))
    assert main(["pipeline", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "metrics.csv").exists()
    assert not (tmp_path / "from_file").exists()
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "metrics.csv").exists()


def test_subcommands_chain_to_the_pipeline_result(smoke_out, tmp_path):
    _, out = smoke_out
    cfg = write_config(tmp_path)
    o = str(tmp_path / "steps")
    for cmd in ("simulate", "train", "estimate", "evaluate"):
        assert main([cmd, "--config", str(cfg), "--out", o]) == 0, cmd
    steps = Path(o)
    assert (steps / "metrics.csv").read_bytes() == (out / "metrics.csv").read_bytes()
    assert (steps / "estimates.csv").read_bytes() == (out / "estimates.csv").read_bytes()


def test_train_without_dataset_reports_missing_file(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "empty")]) == 1
    assert "dataset.csv" in capsys.readouterr().err


def test_bare_scenario_file_runs(tmp_path):
    src = Path(__file__).resolve().parent.parent / "src" / "elastiq" / "data" / "smoke.json"
    shutil.copy(src, tmp_path / "scenario.json")
    assert main(["simulate", "--config", str(tmp_path / "scenario.json"), "--out", str(tmp_path / "o")]) == 0
    header = (tmp_path / "o" / "oracle.csv").read_text().splitlines()[0]
    assert header == "anchor_timestamp,e0,e1,e2,e3,e4,e5,e6,e7,e8,dlambda"

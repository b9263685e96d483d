import json

import numpy as np
import pytest

from npmlda.cli import expand_sweep, main
from npmlda.io import load_dataset, load_model
from npmlda.simgen import ScenarioConfig

SMALL = ["--p", "4", "--q", "4", "--n-train", "12", "--n-test", "8", "--seed", "3"]


def _last_json(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


@pytest.fixture
def simulated(tmp_path, capsys):
    assert main(["simulate", *SMALL, "--out", str(tmp_path / "sim")]) == 0
    info = _last_json(capsys)
    assert info == {"out": str(tmp_path / "sim"), "train": 24, "test": 16}
    return tmp_path / "sim"


def test_simulate_writes_both_splits(simulated):
    assert load_dataset(simulated / "train").shape == (4, 4)
    truth = json.loads((simulated / "truth.json").read_text())
    assert np.array(truth["b"]).shape == (4, 4)


def test_simulate_flat(tmp_path, capsys):
    assert main(["simulate", *SMALL, "--format", "flat", "--out", str(tmp_path)]) == 0
    assert len(load_dataset(tmp_path / "train.csv")) == 24


def test_train_predict(simulated, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert main(["train", "--data", str(simulated / "train"), "--out", str(model)]) == 0
    assert _last_json(capsys)["K"] == 2
    assert load_model(model).method == "npmlda"
    preds = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--data", str(simulated / "test"),
                 "--out", str(preds)]) == 0
    info = _last_json(capsys)
    assert info["n"] == 16 and 0 <= info["error_rate"] <= 1
    assert preds.read_text().splitlines()[0] == "index,predicted,label"


def test_flags_override_config(simulated, tmp_path, capsys):
    conf = tmp_path / "c.toml"
    conf.write_text('[cov]\nmethod = "diagonal"\n[npmle]\ngrid_size = 40\n')
    model = tmp_path / "m.json"
    argv = ["train", "--config", str(conf), "--data", str(simulated / "train"), "--out", str(model)]
    assert main(argv) == 0
    cfg = load_model(model).configs
    assert cfg["cov"]["method"] == "diagonal" and cfg["npmle"]["grid_size"] == 40
    assert main(argv + ["--cov-method", "flipflop-ridge", "--grid-size", "50"]) == 0
    cfg = load_model(model).configs
    assert cfg["cov"]["method"] == "flipflop-ridge" and cfg["npmle"]["grid_size"] == 50


def test_eval_with_json_sweep(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({
        "scenario": {"n_train": 15, "n_test": 15, "replications": 2,
                     "pattern": {"p": 4, "q": 4}},
        "sweep": {"models": [1, 3], "thetas": [0.5, 1.0]},
        "methods": ["naive", "oracle"],
    }))
    out = tmp_path / "r.json"
    assert main(["eval", "--config", str(conf), "--out", str(out), "--csv", str(tmp_path / "r.csv"),
                 "--b-dir", str(tmp_path / "b")]) == 0
    stdout = capsys.readouterr().out
    assert stdout == (tmp_path / "r.csv").read_text()
    assert len(stdout.splitlines()) == 1 + 4 * 2
    assert len(list((tmp_path / "b").iterdir())) == 4 * 3

    assert main(["report", str(out), "--csv", str(tmp_path / "again.csv")]) == 0
    assert (tmp_path / "again.csv").read_text() == stdout


def test_eval_methods_flag(tmp_path, capsys):
    assert main(["eval", *SMALL, "--replications", "1", "--methods", "oracle",
                 "--out", str(tmp_path / "r.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and ",oracle," in lines[1]


def test_loocv(simulated, capsys):
    assert main(["loocv", "--data", str(simulated / "train"), "--method", "naive"]) == 0
    info = _last_json(capsys)
    assert info["n"] == 24 and 0 <= info["loocv_rate"] <= 1


def test_eeg_prep(tmp_path, capsys):
    rng = np.random.default_rng(0)
    for subj in ("co2a0000001", "co2c0000002"):
        lines = [f"# {subj}.rd"]
        data = rng.standard_normal((64, 256)).round(3)
        lines += [f"0 C{c} {s} {data[c, s]}" for c in range(64) for s in range(256)]
        (tmp_path / f"{subj}.rd.000").write_text("\n".join(lines) + "\n")
    out = tmp_path / "eeg.csv"
    assert main(["eeg-prep", "--raw", str(tmp_path), "--out", str(out), "--format", "flat"]) == 0
    info = _last_json(capsys)
    assert info["subjects"] == 2 and info["alcoholic"] == 1 and info["trials_used"] == 2
    assert load_dataset(out).shape == (16, 64)


def test_error_line_and_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("label,x_1_1\n1,nan\n")
    assert main(["loocv", "--data", str(bad)]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert json.loads(err[0])["error"] == "NonFiniteValue"


def test_missing_file_error(tmp_path, capsys):
    assert main(["predict", "--model", str(tmp_path / "none.json"), "--data", "x"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_expand_sweep():
    base = ScenarioConfig()
    assert expand_sweep(base, None) == [base]
    grid = expand_sweep(base, {"models": [1, 2, 3], "sizes": ["small", "large"]})
    assert len(grid) == 6
    assert {(s.model, s.pattern.size) for s in grid} == {
        (m, z) for m in (1, 2, 3) for z in ("small", "large")
    }

import csv
import io

import numpy as np
import pytest

from npmlda.classifier import naive_lda_train, train
from npmlda.errors import ClassTooSmall
from npmlda.harness import (
    CSV_COLUMNS,
    EvalReport,
    ReplicationFailed,
    emit_report,
    load_reports,
    loocv,
    loocv_predictions,
    report_csv,
    resolve_jobs,
    run_experiment,
)
from npmlda.kroncov import CovEstimatorConfig
from npmlda.matnorm import MatrixDataset
from npmlda.simgen import PatternSpec, ScenarioConfig


def _small(model=1, sparsity="dense", theta=1.0, reps=2, n=30, p=6):
    return ScenarioConfig(model=model, pattern=PatternSpec(sparsity, "large", theta, p, p),
                          n_train=n, n_test=n, replications=reps, master_seed=7)


def test_same_seed_same_report():
    cfg = _small(reps=1)
    assert run_experiment(cfg) == run_experiment(cfg)


def test_parallel_matches_serial():
    cfg = _small(reps=3)
    assert run_experiment(cfg, jobs=1) == run_experiment(cfg, jobs=2)


def test_jobs_env_fallback(monkeypatch):
    monkeypatch.setenv("NPMLDA_JOBS", "3")
    assert resolve_jobs() == 3
    assert resolve_jobs(1) == 1
    monkeypatch.delenv("NPMLDA_JOBS")
    assert resolve_jobs() == 1


def test_oracle_at_chance_when_B_is_zero():
    cfg = _small(sparsity="sparse", theta=0.0, reps=5, n=200)
    rep = run_experiment(cfg, methods=["oracle"])
    assert all(abs(r - 0.5) <= 0.05 for r in rep.rates["oracle"])


def test_report_aggregates():
    rep = run_experiment(_small(reps=4))
    for m, rates in rep.rates.items():
        assert len(rates) == 4
        assert all(0 <= r <= 1 for r in rates)
        assert rep.mean(m) == pytest.approx(sum(rates) / 4, rel=1e-15)
    assert set(rep.b_average) == {"npmlda", "naive", "oracle", "truth"}
    assert rep.config["cov"]["method"] == "gemini"


def test_replication_failure_names_seed():
    cfg = _small(reps=1)
    with pytest.raises(ReplicationFailed, match="master_seed=7"):
        run_experiment(cfg, methods=["bogus"])


def test_empty_method_set_gives_header_only_csv(tmp_path):
    rep = run_experiment(_small(reps=1), methods=[])
    path = emit_report(rep, "csv", tmp_path / "r.csv")
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_json_round_trip(tmp_path):
    rep = run_experiment(_small(reps=2))
    emit_report(rep, "json", tmp_path / "r.json")
    (back,) = load_reports(tmp_path / "r.json")
    assert back == rep
    assert report_csv([back]) == report_csv([rep])


def test_csv_rows_scenarios_times_methods(tmp_path):
    reps = [run_experiment(_small(model=m, reps=1), methods=["naive", "oracle"]) for m in (1, 2, 3)]
    path = emit_report(reps, "csv", tmp_path / "r.csv", b_dir=tmp_path / "b")
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert len(rows) == 3 * 2
    assert tuple(rows[0]) == CSV_COLUMNS
    grids = sorted(f.name for f in (tmp_path / "b").iterdir())
    assert len(grids) == 3 * 3  # naive, oracle, truth
    assert np.loadtxt(tmp_path / "b" / grids[0], delimiter=",").shape == (6, 6)


def test_se_is_sample_standard_error():
    rep = EvalReport("s", {}, {"x": [0.1, 0.2, 0.4]})
    assert rep.se("x") == pytest.approx(np.std([0.1, 0.2, 0.4], ddof=1) / np.sqrt(3), rel=1e-14)
    assert EvalReport("s", {}, {"x": [0.3]}).se("x") == 0.0


def _brute_loocv(x, y, fit):
    errors = 0
    for i in range(len(y)):
        idx = [j for j in range(len(y)) if j != i]
        model = fit(x[idx], y[idx])
        errors += int(model.predict(x[i])) != y[i]
    return errors / len(y)


@pytest.mark.parametrize("method,fit", [("npmlda", train), ("naive", naive_lda_train)])
def test_loocv_matches_brute_force(method, fit):
    rng = np.random.default_rng(11)
    x = rng.standard_normal((16, 3, 3))
    y = np.repeat([1, 2], 8)
    x[y == 1] += 0.4
    assert loocv(MatrixDataset(x, y), method=method) == _brute_loocv(x, y, fit)


def test_loocv_separated_clouds():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((20, 3, 3)) * 0.1
    y = np.repeat([1, 2], 10)
    x[y == 1] += 5.0
    assert loocv(MatrixDataset(x, y)) == 0.0


def test_loocv_noise_labels_near_chance():
    rng = np.random.default_rng(3)
    ds = MatrixDataset(rng.standard_normal((40, 4, 4)), rng.permutation(np.repeat([1, 2], 20)))
    assert 0.3 <= loocv(ds, method="naive") <= 0.7


@pytest.mark.parametrize("seed", range(5))
def test_loocv_two_per_class_quantized(seed):
    # a fold keeps one nonzero residual, which the ridge estimator tolerates
    rng = np.random.default_rng(seed)
    ds = MatrixDataset(rng.standard_normal((4, 3, 3)), np.array([1, 1, 2, 2]))
    rate = loocv(ds, CovEstimatorConfig(method="flipflop-ridge"))
    assert rate in (0.0, 0.25, 0.5, 0.75, 1.0)


def test_loocv_singleton_class_rejected():
    x = np.random.default_rng(0).standard_normal((4, 2, 2))
    with pytest.raises(ClassTooSmall):
        loocv_predictions(MatrixDataset(x, np.array([1, 1, 1, 2])))

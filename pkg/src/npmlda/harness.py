"""Experiment orchestration: seeded replications, LOOCV and report files."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ClassTooSmall
from .classifier import OracleParams, estimated_B, naive_lda_train, oracle_classify, train
from .kroncov import CovEstimatorConfig
from .matnorm import MatrixDataset
from .npmle import NpmleConfig
from .simgen import ScenarioConfig, make_dataset

METHODS = ("npmlda", "naive", "oracle")
CSV_COLUMNS = ("scenario", "method", "size", "theta", "mean_rate", "se", "reps")


class ReplicationFailed(RuntimeError):
    pass


def resolve_jobs(jobs=None):
    if jobs is None:
        jobs = int(os.environ.get("NPMLDA_JOBS", "1") or 1)
    return max(1, int(jobs))


def _map(fn, items, jobs):
    """Ordered map, optionally over a process pool."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class EvalReport:
    scenario: str
    config: dict
    rates: dict[str, list[float]]
    b_average: dict[str, np.ndarray] = field(default_factory=dict)

    def mean(self, method):
        return float(np.mean(self.rates[method]))

    def se(self, method):
        r = np.asarray(self.rates[method], dtype=float)
        return float(r.std(ddof=1) / np.sqrt(r.size)) if r.size > 1 else 0.0

    def rows(self):
        pat = self.config.get("pattern", {})
        for method, rates in self.rates.items():
            yield {
                "scenario": self.scenario,
                "method": method,
                "size": pat.get("size", ""),
                "theta": pat.get("theta", ""),
                "mean_rate": self.mean(method),
                "se": self.se(method),
                "reps": len(rates),
            }

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "config": self.config,
            "rates": {k: list(map(float, v)) for k, v in self.rates.items()},
            "b_average": {k: v.tolist() for k, v in self.b_average.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["scenario"],
            d["config"],
            {k: list(v) for k, v in d["rates"].items()},
            {k: np.asarray(v, dtype=float) for k, v in d.get("b_average", {}).items()},
        )

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return (
            self.scenario == other.scenario
            and self.config == other.config
            and self.rates == other.rates
            and self.b_average.keys() == other.b_average.keys()
            and all(np.array_equal(v, other.b_average[k]) for k, v in self.b_average.items())
        )


@dataclass(frozen=True)
class _Task:
    cfg: ScenarioConfig
    rep: int
    methods: tuple
    cov_cfg: CovEstimatorConfig
    npmle_cfg: NpmleConfig


def _error_rate(pred, y):
    return float(np.mean(np.asarray(pred) != np.asarray(y)))


def run_replication(task):
    """Generate one replication and evaluate each method on its test split.

    Returns ``(rates, b_estimates)`` keyed by method name.
    """
    train_ds, test_ds, truth = make_dataset(task.cfg, task.rep)
    rates, bs = {}, {"truth": truth.b}
    for method in task.methods:
        if method == "oracle":
            params = OracleParams.from_truth(truth)
            rates[method] = _error_rate(oracle_classify(params, test_ds.x), test_ds.y)
            bs[method] = params.coefficient()
            continue
        if method == "npmlda":
            model = train(train_ds, cov_cfg=task.cov_cfg, npmle_cfg=task.npmle_cfg)
        elif method == "naive":
            model = naive_lda_train(train_ds, cov_cfg=task.cov_cfg)
        else:
            raise ValueError(f"unknown method {method!r}")
        rates[method] = _error_rate(model.predict(test_ds.x), test_ds.y)
        bs[method] = estimated_B(model)
    return rates, bs


def _run_task(task):
    try:
        return run_replication(task)
    except Exception as exc:
        raise ReplicationFailed(
            f"replication {task.rep} failed (master_seed={task.cfg.master_seed}): {exc}"
        ) from exc


def run_experiment(cfg, methods=METHODS, cov_cfg=None, npmle_cfg=None, jobs=None):
    """Run every replication of ``cfg`` and aggregate misclassification rates.

    ``b_average`` holds the replication-averaged coefficient matrix for each
    method, plus the average true B under the key ``"truth"``.
    """
    cov_cfg = cov_cfg or CovEstimatorConfig()
    npmle_cfg = npmle_cfg or NpmleConfig()
    methods = tuple(methods)
    tasks = [_Task(cfg, r, methods, cov_cfg, npmle_cfg) for r in range(cfg.replications)]
    results = _map(_run_task, tasks, resolve_jobs(jobs))
    rates = {m: [res[0][m] for res in results] for m in methods}
    b_average = {}
    if results:
        for key in results[0][1]:
            b_average[key] = np.mean([res[1][key] for res in results], axis=0)
    config = cfg.to_dict()
    config["cov"] = cov_cfg.to_dict()
    config["npmle"] = npmle_cfg.to_dict()
    return EvalReport(cfg.scenario_id, config, rates, b_average)


def _fit(method, train_ds, cov_cfg, npmle_cfg):
    if method == "npmlda":
        return train(train_ds, cov_cfg=cov_cfg, npmle_cfg=npmle_cfg)
    if method == "naive":
        return naive_lda_train(train_ds, cov_cfg=cov_cfg)
    raise ValueError(f"LOOCV supports 'npmlda' and 'naive', not {method!r}")


@dataclass(frozen=True)
class _Fold:
    ds: MatrixDataset
    i: int
    method: str
    cov_cfg: CovEstimatorConfig
    npmle_cfg: NpmleConfig


def _run_fold(fold):
    keep = np.arange(len(fold.ds)) != fold.i
    model = _fit(fold.method, fold.ds.subset(keep), fold.cov_cfg, fold.npmle_cfg)
    return int(model.predict(fold.ds.x[fold.i]))


def loocv_predictions(ds, cov_cfg=None, npmle_cfg=None, method="npmlda", jobs=None):
    cov_cfg = cov_cfg or CovEstimatorConfig()
    npmle_cfg = npmle_cfg or NpmleConfig()
    labels, counts = np.unique(ds.y, return_counts=True)
    if len(ds) < 3 or labels.size < 2:
        raise ValueError("LOOCV needs at least 3 samples from at least 2 classes")
    if np.any(counts < 2):
        raise ClassTooSmall(
            f"classes {labels[counts < 2].tolist()} would vanish from a training fold"
        )
    folds = [_Fold(ds, i, method, cov_cfg, npmle_cfg) for i in range(len(ds))]
    return np.array(_map(_run_fold, folds, resolve_jobs(jobs)))


def loocv(ds, cov_cfg=None, npmle_cfg=None, method="npmlda", jobs=None):
    """Leave-one-out misclassification rate."""
    pred = loocv_predictions(ds, cov_cfg, npmle_cfg, method, jobs)
    return _error_rate(pred, ds.y)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def report_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        for row in rep.rows():
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit_report(reports, fmt, path, b_dir=None):
    """Write one or more reports as CSV or JSON.

    With ``b_dir``, each averaged coefficient matrix is also written as a
    p x q CSV grid named ``<scenario>__<method>.csv``.
    """
    if isinstance(reports, EvalReport):
        reports = [reports]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path.write_text(report_csv(reports))
    elif fmt == "json":
        payload = [r.to_dict() for r in reports]
        path.write_text(json.dumps(payload, indent=1))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if b_dir is not None:
        write_b_grids(reports, b_dir)
    return path


def write_b_grids(reports, b_dir):
    b_dir = Path(b_dir)
    b_dir.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        for method, b in rep.b_average.items():
            np.savetxt(b_dir / f"{rep.scenario}__{method}.csv", b, fmt="%.17g", delimiter=",")


def load_reports(path):
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [EvalReport.from_dict(d) for d in data]

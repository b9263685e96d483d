"""Command line interface: ``npmlda <subcommand> [options]``.

Every subcommand accepts ``--config`` pointing to a JSON or TOML file; flags
given on the command line override values from the file. Errors exit with
status 1 and print one JSON line ``{"error": ..., "message": ...}`` to stderr.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .classifier import naive_lda_train, train
from .eeg import PrepLog, load_eeg_directory
from .io import load_dataset, load_model, save_dataset, save_model
from .kroncov import CovEstimatorConfig
from .npmle import NpmleConfig
from .simgen import PatternSpec, ScenarioConfig, desk_scenario, full_scenario, make_dataset

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

PRESETS = {"desk": desk_scenario, "full": full_scenario}


def load_config(path):
    if path is None:
        return {}
    path = Path(path)
    if path.suffix.lower() == ".toml":
        return tomllib.loads(path.read_text())
    return json.loads(path.read_text())


def _override(base, **flags):
    out = dict(base)
    out.update({k: v for k, v in flags.items() if v is not None})
    return out


def cov_config(conf, args):
    d = _override(
        conf.get("cov", {}),
        method=args.cov_method,
        row_penalty=args.row_penalty,
        col_penalty=args.col_penalty,
        ridge=args.ridge,
    )
    return CovEstimatorConfig.from_dict(d)


def npmle_config(conf, args):
    d = _override(
        conf.get("npmle", {}),
        grid_size=args.grid_size,
        grid_padding=args.grid_padding,
        solver=args.solver,
        max_iter=args.npmle_max_iter,
    )
    return NpmleConfig.from_dict(d)


def scenario_config(conf, args):
    sc = dict(conf.get("scenario", {}))
    pattern = dict(sc.pop("pattern", {}))
    preset = args.preset or conf.get("preset")
    if preset:
        base = PRESETS[preset]().to_dict()
        base_pattern = base.pop("pattern")
        sc = {**base, **sc}
        pattern = {**base_pattern, **pattern}
    sc = _override(
        sc,
        model=args.model,
        n_train=args.n_train,
        n_test=args.n_test,
        replications=args.replications,
        master_seed=args.seed,
    )
    pattern = _override(pattern, sparsity=args.sparsity, size=args.size, theta=args.theta,
                        p=args.p, q=args.q)
    return ScenarioConfig(pattern=PatternSpec(**pattern), **sc)


def expand_sweep(base, sweep):
    """All scenarios from a ``{models, sparsity, sizes, thetas}`` grid."""
    if not sweep:
        return [base]
    models = sweep.get("models", [base.model])
    sparsities = sweep.get("sparsity", [base.pattern.sparsity])
    sizes = sweep.get("sizes", [base.pattern.size])
    thetas = sweep.get("thetas", [base.pattern.theta])
    out = []
    for model, sp, size, theta in itertools.product(models, sparsities, sizes, thetas):
        pat = replace(base.pattern, sparsity=sp, size=size, theta=float(theta))
        out.append(replace(base, model=int(model), pattern=pat))
    return out


def _dump(obj):
    print(json.dumps(obj))


def cmd_simulate(args, conf):
    cfg = scenario_config(conf, args)
    out = Path(args.out)
    suffix = ".csv" if args.format == "flat" else ""
    train_ds, test_ds, truth = make_dataset(cfg, args.replication)
    save_dataset(train_ds, out / f"train{suffix}", args.format)
    save_dataset(test_ds, out / f"test{suffix}", args.format)
    (out / "truth.json").write_text(json.dumps({
        "scenario": cfg.to_dict(),
        "replication": args.replication,
        "b": truth.b.tolist(),
        "u": truth.u.tolist(),
        "v": truth.v.tolist(),
        "means": truth.means.tolist(),
    }))
    _dump({"out": str(out), "train": len(train_ds), "test": len(test_ds)})


def cmd_train(args, conf):
    ds = load_dataset(args.data)
    cov_cfg = cov_config(conf, args)
    if args.method == "naive":
        model = naive_lda_train(ds, cov_cfg=cov_cfg)
    else:
        model = train(ds, cov_cfg=cov_cfg, npmle_cfg=npmle_config(conf, args))
    save_model(model, args.out)
    _dump({"model": str(args.out), "p": model.p, "q": model.q, "K": model.n_classes})


def cmd_predict(args, conf):
    model = load_model(args.model)
    ds = load_dataset(args.data)
    pred = model.predict(ds.x)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("index,predicted,label\n")
            for i, (p_, y) in enumerate(zip(pred, ds.y)):
                fh.write(f"{i},{int(p_)},{int(y)}\n")
    _dump({"n": len(ds), "error_rate": float(np.mean(pred != ds.y))})


def cmd_eval(args, conf):
    base = scenario_config(conf, args)
    scenarios = expand_sweep(base, conf.get("sweep"))
    methods = args.methods.split(",") if args.methods else conf.get("methods", list(harness.METHODS))
    methods = [m for m in methods if m]
    jobs = args.jobs if args.jobs is not None else conf.get("jobs")
    cov_cfg, npmle_cfg = cov_config(conf, args), npmle_config(conf, args)
    reports = [
        harness.run_experiment(sc, methods, cov_cfg, npmle_cfg, jobs=jobs) for sc in scenarios
    ]
    harness.emit_report(reports, "json", args.out, b_dir=args.b_dir)
    if args.csv:
        harness.emit_report(reports, "csv", args.csv)
    sys.stdout.write(harness.report_csv(reports))


def cmd_loocv(args, conf):
    ds = load_dataset(args.data)
    jobs = args.jobs if args.jobs is not None else conf.get("jobs")
    rate = harness.loocv(ds, cov_config(conf, args), npmle_config(conf, args),
                         method=args.method, jobs=jobs)
    _dump({"method": args.method, "n": len(ds), "loocv_rate": rate})


def cmd_eeg_prep(args, conf):
    prep_log = PrepLog()
    ds, subjects = load_eeg_directory(args.raw, prep_log)
    save_dataset(ds, args.out, args.format)
    _dump({
        "subjects": len(subjects),
        "alcoholic": int(np.sum(ds.y == 1)),
        "control": int(np.sum(ds.y == 2)),
        "trials_used": prep_log.trials_used,
        "trials_skipped": prep_log.trials_skipped,
        "files_unreadable": prep_log.files_unreadable,
    })


def cmd_report(args, conf):
    reports = [r for path in args.inputs for r in harness.load_reports(path)]
    if args.csv:
        harness.emit_report(reports, "csv", args.csv)
    if args.json:
        harness.emit_report(reports, "json", args.json)
    if args.b_dir:
        harness.write_b_grids(reports, args.b_dir)
    if not (args.csv or args.json):
        sys.stdout.write(harness.report_csv(reports))


def _add_cov_flags(p):
    g = p.add_argument_group("covariance estimate")
    g.add_argument("--cov-method", choices=["gemini", "flipflop-ridge", "diagonal", "known"],
                   help="'known' reads u and v from the config file")
    g.add_argument("--row-penalty", type=float)
    g.add_argument("--col-penalty", type=float)
    g.add_argument("--ridge", type=float)


def _add_npmle_flags(p):
    g = p.add_argument_group("NPMLE")
    g.add_argument("--grid-size", type=int)
    g.add_argument("--grid-padding", type=float)
    g.add_argument("--solver", choices=["em", "frank-wolfe"])
    g.add_argument("--npmle-max-iter", type=int)


def _add_scenario_flags(p):
    g = p.add_argument_group("scenario")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--model", type=int, choices=[1, 2, 3])
    g.add_argument("--sparsity", choices=["sparse", "dense"])
    g.add_argument("--size", choices=["small", "medium", "large"])
    g.add_argument("--theta", type=float)
    g.add_argument("--p", type=int)
    g.add_argument("--q", type=int)
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-test", type=int)
    g.add_argument("--replications", type=int)
    g.add_argument("--seed", type=int, help="master seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="npmlda", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON or TOML config file")
        p.set_defaults(func=fn)
        return p

    p = add("simulate", cmd_simulate, "generate a simulated train/test dataset")
    _add_scenario_flags(p)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--format", choices=["dir", "flat"], default="dir")
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "fit a model and save it as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["npmlda", "naive"], default="npmlda")
    _add_cov_flags(p)
    _add_npmle_flags(p)

    p = add("predict", cmd_predict, "classify a dataset with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")

    p = add("eval", cmd_eval, "run simulation replications and report error rates")
    _add_scenario_flags(p)
    _add_cov_flags(p)
    _add_npmle_flags(p)
    p.add_argument("--methods", help="comma separated subset of npmlda,naive,oracle")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv")
    p.add_argument("--b-dir", help="directory for averaged B grids")

    p = add("loocv", cmd_loocv, "leave-one-out error rate on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["npmlda", "naive"], default="npmlda")
    p.add_argument("--jobs", type=int)
    _add_cov_flags(p)
    _add_npmle_flags(p)

    p = add("eeg-prep", cmd_eeg_prep, "preprocess UCI EEG trial files into a dataset")
    p.add_argument("--raw", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["dir", "flat"], default="dir")

    p = add("report", cmd_report, "convert report JSON files to CSV/JSON")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--b-dir")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        conf = load_config(args.config)
        args.func(args, conf)
    except Exception as exc:  # reported as one machine-readable line
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

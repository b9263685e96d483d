"""Desk-scale simulation sweep: every model, sparsity, cross size and theta.

Writes ``<out>/report.json``, ``<out>/rates.csv`` and averaged B grids under
``<out>/b/``. Use ``--full`` for the 64 x 64, 300-per-class, 200-replication
setting (hours of CPU time).

    python3 scripts/desk_sweep.py --out results/desk --jobs 4
"""

import argparse
import itertools
import logging
import sys
import time
from pathlib import Path

from npmlda.harness import emit_report, run_experiment
from npmlda.simgen import desk_scenario, full_scenario


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--models", default="1,2,3")
    ap.add_argument("--sparsity", default="dense,sparse")
    ap.add_argument("--sizes", default="small,medium,large")
    ap.add_argument("--thetas", default="0.5,0.8,1.1")
    ap.add_argument("--replications", type=int)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    make = full_scenario if args.full else desk_scenario
    extra = {"master_seed": args.seed}
    if args.replications:
        extra["replications"] = args.replications
    grid = itertools.product(
        [int(m) for m in args.models.split(",")],
        args.sparsity.split(","),
        args.sizes.split(","),
        [float(t) for t in args.thetas.split(",")],
    )
    reports = []
    for model, sparsity, size, theta in grid:
        cfg = make(model=model, sparsity=sparsity, size=size, theta=theta, **extra)
        start = time.perf_counter()
        rep = run_experiment(cfg, jobs=args.jobs)
        logging.info(
            "%s  oracle=%.4f npmlda=%.4f naive=%.4f  (%.1fs)", cfg.scenario_id,
            rep.mean("oracle"), rep.mean("npmlda"), rep.mean("naive"),
            time.perf_counter() - start,
        )
        reports.append(rep)

    out = Path(args.out)
    emit_report(reports, "json", out / "report.json", b_dir=out / "b")
    emit_report(reports, "csv", out / "rates.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""LOOCV error of NPMLDA and naive LDA on the UCI alcoholism EEG data.

``data`` is either the raw trial directory (``*.rd*`` files, optionally
gzipped) or a dataset previously written by ``npmlda eeg-prep``.

    python3 scripts/eeg_loocv.py ~/data/eeg_full --jobs 4
"""

import argparse
import json
import sys
import time
from pathlib import Path

from npmlda.eeg import PrepLog, load_eeg_directory
from npmlda.harness import loocv
from npmlda.io import load_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data")
    ap.add_argument("--methods", default="npmlda,naive")
    ap.add_argument("--jobs", type=int)
    args = ap.parse_args(argv)

    path = Path(args.data)
    if (path / "manifest.json").exists() or path.suffix == ".csv":
        ds = load_dataset(path)
    else:
        prep = PrepLog()
        ds, _ = load_eeg_directory(path, prep)
        print(f"trials used {prep.trials_used}, skipped {prep.trials_skipped}", file=sys.stderr)
    for method in args.methods.split(","):
        start = time.perf_counter()
        rate = loocv(ds, method=method, jobs=args.jobs)
        print(json.dumps({"method": method, "n": len(ds), "loocv_rate": rate,
                          "seconds": round(time.perf_counter() - start, 1)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

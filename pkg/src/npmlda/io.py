"""Dataset files and model JSON.

Two dataset layouts are supported:

* directory: ``manifest.json`` plus one CSV per sample (p rows, q values each);
* flat CSV: header ``label,x_1_1,x_2_1,...,x_p_q`` and one row per sample,
  values in column-major (``vec``) order.

Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .classifier import TrainedModel
from .errors import NonFiniteValue, ParseError, SchemaError
from .kroncov import KroneckerCovariance
from .matnorm import MatrixDataset, unvec, vec_batch
from .npmle import MixingDistribution

MODEL_VERSION = 1
_FMT = "%.17g"
_HEADER_RE = re.compile(r"x_(\d+)_(\d+)$")


def _fmt(value):
    return _FMT % value


def save_dataset(ds, path, fmt=None):
    """Write ``ds``; ``fmt`` is ``"dir"`` or ``"flat"`` (default: by suffix)."""
    path = Path(path)
    fmt = fmt or ("flat" if path.suffix.lower() == ".csv" else "dir")
    if fmt == "flat":
        _save_flat(ds, path)
    elif fmt == "dir":
        _save_dir(ds, path)
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
    return path


def _save_dir(ds, path):
    path.mkdir(parents=True, exist_ok=True)
    p, q = ds.shape
    records = []
    width = max(4, len(str(len(ds))))
    for i, (x, label) in enumerate(zip(ds.x, ds.y)):
        name = f"sample_{i:0{width}d}.csv"
        np.savetxt(path / name, x, fmt=_FMT, delimiter=",")
        records.append({"file": name, "label": int(label)})
    manifest = {
        "p": p,
        "q": q,
        "class_labels": list(ds.class_names) if ds.class_names else sorted({int(v) for v in ds.y}),
        "samples": records,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=1))


def _save_flat(ds, path):
    p, q = ds.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["label"] + [f"x_{i}_{j}" for j in range(1, q + 1) for i in range(1, p + 1)]
    flat = vec_batch(ds.x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for label, row in zip(ds.y, flat):
            w.writerow([int(label)] + [_fmt(v) for v in row])


def load_dataset(path):
    path = Path(path)
    if path.is_dir():
        return _load_dir(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return _load_flat(path)


def _check_finite(arr, where):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"non-finite value in {where}")


def _load_dir(path):
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise SchemaError(f"{path} has no manifest.json") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed manifest: {exc}") from exc
    try:
        p, q = int(manifest["p"]), int(manifest["q"])
        records = manifest["samples"]
        class_labels = manifest.get("class_labels")
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"manifest is missing required fields: {exc}") from exc
    names = None
    if class_labels and all(isinstance(c, str) for c in class_labels):
        names = tuple(class_labels)
        allowed = set(range(1, len(names) + 1))
    else:
        allowed = {int(c) for c in class_labels} if class_labels else None
    xs, ys = [], []
    for rec in records:
        f = path / rec["file"]
        try:
            x = np.loadtxt(f, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ParseError(f"cannot parse {f}: {exc}") from exc
        if x.size != p * q:
            raise SchemaError(f"{f} holds {x.size} values, expected {p * q}")
        if x.shape != (p, q):
            raise SchemaError(f"{f} has shape {x.shape}, expected ({p}, {q})")
        _check_finite(x, f)
        label = rec["label"]
        if names is not None and isinstance(label, str):
            if label not in names:
                raise SchemaError(f"label {label!r} not among {names}")
            label = names.index(label) + 1
        label = int(label)
        if allowed is not None and label not in allowed:
            raise SchemaError(f"label {label} not in the manifest's class set")
        xs.append(x)
        ys.append(label)
    if not xs:
        raise SchemaError("dataset has no samples")
    return MatrixDataset(np.stack(xs), np.array(ys), names)


def _load_flat(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if not header or header[0].strip() != "label":
        raise ParseError("flat dataset header must start with 'label'")
    idx = []
    for h in header[1:]:
        m = _HEADER_RE.match(h.strip())
        if not m:
            raise ParseError(f"bad column name {h!r}")
        idx.append((int(m.group(1)), int(m.group(2))))
    if not idx:
        raise SchemaError("no value columns")
    p = max(i for i, _ in idx)
    q = max(j for _, j in idx)
    expected = [(i, j) for j in range(1, q + 1) for i in range(1, p + 1)]
    if idx != expected:
        raise SchemaError("value columns are not in column-major order")
    ys, vals = [], []
    for n, row in enumerate(body, start=2):
        if not row:
            continue
        if len(row) != p * q + 1:
            raise SchemaError(f"line {n}: {len(row) - 1} values, expected {p * q}")
        try:
            ys.append(int(row[0]))
            vals.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ParseError(f"line {n}: {exc}") from exc
    if not vals:
        raise SchemaError("dataset has no samples")
    flat = np.array(vals)
    _check_finite(flat, path)
    return MatrixDataset(unvec(flat, p, q), np.array(ys))


# -- model files --------------------------------------------------------------


def _mat(a):
    a = np.asarray(a, dtype=float)
    return {"rows": a.shape[0], "cols": a.shape[1], "data": a.ravel().tolist()}


def _unmat(d, name):
    try:
        a = np.asarray(d["data"], dtype=float).reshape(int(d["rows"]), int(d["cols"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad matrix field {name!r}: {exc}") from exc
    _check_finite(a, name)
    return a


def model_to_dict(model):
    return {
        "version": MODEL_VERSION,
        "method": model.method,
        "p": model.p,
        "q": model.q,
        "K": model.n_classes,
        "labels": model.labels.tolist(),
        "counts": model.counts.tolist(),
        "priors": model.priors.tolist(),
        "u": _mat(model.cov.u),
        "v": _mat(model.cov.v),
        "u_inv_sqrt": _mat(model.cov.u_inv_sqrt),
        "v_inv_sqrt": _mat(model.cov.v_inv_sqrt),
        "scaled_means": model.scaled_means.tolist(),
        "mixing": [g.to_dict() for g in model.mixing] if model.mixing else None,
        "configs": model.configs,
    }


def model_from_dict(d):
    if d.get("version") != MODEL_VERSION:
        raise SchemaError(f"unsupported model version {d.get('version')!r}")
    try:
        p, q, k = int(d["p"]), int(d["q"]), int(d["K"])
        priors = np.asarray(d["priors"], dtype=float)
        means = np.asarray(d["scaled_means"], dtype=float)
        labels = np.asarray(d.get("labels", list(range(1, k + 1))), dtype=np.int64)
        counts = np.asarray(d.get("counts", [0] * k), dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"model file is missing fields: {exc}") from exc
    if priors.shape != (k,) or np.any(priors <= 0) or abs(priors.sum() - 1) > 1e-12:
        raise SchemaError("priors must be K positive numbers summing to 1")
    if means.shape != (k, p * q):
        raise SchemaError(f"scaled_means must have shape ({k}, {p * q})")
    _check_finite(means, "scaled_means")
    u, v = _unmat(d["u"], "u"), _unmat(d["v"], "v")
    if u.shape != (p, p) or v.shape != (q, q):
        raise SchemaError("covariance factors do not match p and q")
    cov = KroneckerCovariance(u, v, _unmat(d["u_inv_sqrt"], "u_inv_sqrt"),
                              _unmat(d["v_inv_sqrt"], "v_inv_sqrt"))
    for fac, root, name in ((cov.u, cov.u_inv_sqrt, "u"), (cov.v, cov.v_inv_sqrt, "v")):
        err = np.linalg.norm(root @ fac @ root - np.eye(len(fac))) / np.sqrt(len(fac))
        if err > 1e-8:
            raise SchemaError(f"{name}_inv_sqrt is not the inverse square root of {name}")
    mixing = d.get("mixing")
    if mixing is not None:
        if len(mixing) != k:
            raise SchemaError("one mixing distribution per class is required")
        mixing = tuple(MixingDistribution.from_dict(g) for g in mixing)
    return TrainedModel(
        labels=labels, priors=priors, cov=cov, scaled_means=means, counts=counts,
        mixing=mixing, method=d.get("method", "npmlda"), configs=d.get("configs", {}),
    )


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed model file: {exc}") from exc
    return model_from_dict(d)

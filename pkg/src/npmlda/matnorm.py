"""Dense matrix helpers for the matrix normal model.

Column-stacking ``vec`` is used throughout, so that
``vec(X) ~ N(vec(M), V kron U)`` when ``X ~ MN(M, U, V)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite, SchemaError

EIG_FLOOR = 1e-12
SYM_RTOL = 1e-10


def vec(x):
    """Stack the columns of ``x`` into one vector (entry (i, j) -> j*p + i)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"vec expects a 2-d matrix, got shape {x.shape}")
    return x.reshape(-1, order="F")


def unvec(v, p, q):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != p * q:
        raise DimensionMismatch(f"cannot unvec length {v.shape[-1]} into {p}x{q}")
    return v.reshape(v.shape[:-1] + (q, p)).swapaxes(-1, -2)


def vec_batch(x):
    """Vectorize a stack of matrices of shape (n, p, q) into (n, p*q)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    return x.swapaxes(-1, -2).reshape(n, -1)


def kron_vec_apply(a, b, x):
    """Compute ``(b kron a) @ vec(x)`` as ``vec(a @ x @ b.T)``.

    ``x`` may also be a stack of shape (n, p, q); the result is then (n, p*q).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    p, q = x.shape[-2:]
    if a.shape != (p, p) or b.shape != (q, q):
        raise DimensionMismatch(
            f"factors {a.shape}, {b.shape} do not conform with data {x.shape}"
        )
    y = a @ x @ b.T
    if y.ndim == 2:
        return vec(y)
    return vec_batch(y)


def check_symmetric(s, name="matrix"):
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise NotPositiveDefinite(f"{name} has non-finite entries")
    scale = max(np.abs(s).max(), np.finfo(float).tiny)
    if np.abs(s - s.T).max() > SYM_RTOL * scale:
        raise NotPositiveDefinite(f"{name} is not symmetric")
    return s


def _spd_eigh(s, name):
    s = check_symmetric(s, name)
    w, q = np.linalg.eigh((s + s.T) / 2)
    if w[-1] <= 0 or w[0] <= EIG_FLOOR * w[-1]:
        raise NotPositiveDefinite(
            f"{name} eigenvalues [{w[0]:.3g}, {w[-1]:.3g}] violate the SPD floor"
        )
    return w, q


def spd_power(s, power, name="matrix"):
    """Symmetric matrix power ``s**power`` of an SPD matrix via eigh."""
    w, q = _spd_eigh(s, name)
    r = (q * w**power) @ q.T
    return (r + r.T) / 2


def spd_inv_sqrt(s, name="matrix"):
    """Symmetric inverse square root ``r`` with ``r @ s @ r = I``."""
    return spd_power(s, -0.5, name)


def spd_sqrt(s, name="matrix"):
    return spd_power(s, 0.5, name)


def make_rng(seed, *keys):
    """Return a Generator keyed by ``(seed, *keys)``.

    Streams for distinct key tuples are statistically independent, so work
    units can be generated in any order.
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("keys cannot be combined with an existing Generator")
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(
            seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(int(k) for k in keys)
        )
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def _cholesky(s, name):
    s = check_symmetric(s, name)
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite") from exc


def sample_matrix_normal(mean, u, v, seed, n):
    """Draw ``n`` matrices from MN(mean, u, v).

    Returns an array of shape (n, p, q). Uses Cholesky factors as the
    square roots, which gives the same law as the symmetric roots.
    """
    mean = np.asarray(mean, dtype=float)
    if mean.ndim != 2:
        raise DimensionMismatch("mean must be a p x q matrix")
    p, q = mean.shape
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (p, p) or v.shape != (q, q):
        raise DimensionMismatch(f"u {u.shape} / v {v.shape} do not match mean {mean.shape}")
    if n < 1:
        raise ValueError("n must be at least 1")
    lu = _cholesky(u, "u")
    lv = _cholesky(v, "v")
    rng = make_rng(seed)
    z = rng.standard_normal((n, p, q))
    return mean + lu @ z @ lv.T


@dataclass(frozen=True)
class MatrixDataset:
    """Labeled matrix samples sharing one shape.

    ``x`` has shape (n, p, q); ``y`` holds integer class labels in 1..K.
    """

    x: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        if x.ndim != 3:
            raise SchemaError(f"samples must have shape (n, p, q), got {x.shape}")
        if y.shape != (x.shape[0],):
            raise SchemaError("one label per sample is required")
        if not np.all(np.isfinite(x)):
            raise SchemaError("samples contain non-finite values")
        if y.size and (not np.issubdtype(y.dtype, np.integer) or y.min() < 1):
            raise SchemaError("labels must be positive integers")
        if self.class_names is not None and y.size and y.max() > len(self.class_names):
            raise SchemaError("label outside the declared class set")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y.astype(np.int64))
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def shape(self):
        return self.x.shape[1:]

    def __len__(self):
        return self.x.shape[0]

    def subset(self, idx):
        return MatrixDataset(self.x[idx], self.y[idx], self.class_names)

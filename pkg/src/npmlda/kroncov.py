"""Estimation of the row/column covariance factors U and V.

Class-centered residuals from all classes are pooled into one estimate,
which is what a common (U, V) across classes calls for. Four estimators share
one interface (:func:`estimate_covariance`):

``gemini``
    Alternating graphical-lasso fits on the row and column Gram correlation
    matrices. The first half-step (with V = I) is the plain Gram estimate of
    the GEMINI procedure; further steps re-weight each Gram by the current
    estimate of the other factor. With zero penalties this is exactly the
    flip-flop MLE.
``flipflop-ridge``
    Alternating closed-form MLE updates with a ridge on V.
``diagonal``
    Flip-flop restricted to diagonal factors.
``known``
    Factors supplied in the config.

All outputs are normalized so that ``trace(U) = p``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from sklearn.covariance import graphical_lasso
from sklearn.exceptions import ConvergenceWarning

from .errors import (
    ClassTooSmall,
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
)
from .matnorm import EIG_FLOOR, check_symmetric, kron_vec_apply, spd_inv_sqrt

METHODS = ("gemini", "flipflop-ridge", "diagonal", "known")


@dataclass(frozen=True)
class CovEstimatorConfig:
    """Settings for the covariance factor estimate.

    ``row_penalty``/``col_penalty``/``ridge`` left as ``None`` resolve to the
    data-dependent defaults described in :func:`default_penalties` and
    :func:`estimate_flipflop`.
    """

    method: str = "gemini"
    row_penalty: float | None = None
    col_penalty: float | None = None
    penalty_scale: float = 0.5
    ridge: float | None = None
    max_iter: int = 100
    tol: float = 1e-6
    glasso_tol: float = 1e-6
    glasso_max_iter: int = 200
    u: tuple | None = field(default=None, repr=False)
    v: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown covariance method {self.method!r}")
        for name in ("row_penalty", "col_penalty", "ridge"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("u", "v"):
            val = getattr(self, name)
            if val is not None:
                arr = np.asarray(val, dtype=float)
                object.__setattr__(self, name, tuple(map(tuple, arr)))
        if self.method == "known" and (self.u is None or self.v is None):
            raise ValueError("method 'known' requires u and v")

    def to_dict(self):
        d = asdict(self)
        for name in ("u", "v"):
            if d[name] is not None:
                d[name] = [list(r) for r in d[name]]
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown covariance config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class KroneckerCovariance:
    """Row factor ``u`` (p x p), column factor ``v`` (q x q) and their
    symmetric inverse square roots. ``Sigma = v kron u`` is never formed."""

    u: np.ndarray
    v: np.ndarray
    u_inv_sqrt: np.ndarray
    v_inv_sqrt: np.ndarray
    n_iter: int = 0
    converged: bool = True

    @classmethod
    def from_factors(cls, u, v, normalize=True, **info):
        u = check_symmetric(np.array(u, dtype=float), "u")
        v = check_symmetric(np.array(v, dtype=float), "v")
        if normalize:
            c = np.trace(u) / u.shape[0]
            if not c > 0:
                raise NotPositiveDefinite("u has nonpositive trace")
            u, v = u / c, v * c
        return cls(u, v, spd_inv_sqrt(u, "u"), spd_inv_sqrt(v, "v"), **info)

    @property
    def p(self):
        return self.u.shape[0]

    @property
    def q(self):
        return self.v.shape[0]

    def sigma(self):
        """Assembled ``v kron u``; for small checks only."""
        return np.kron(self.v, self.u)

    def whiten(self, x):
        return whiten(x, self)


def whiten(x, cov):
    """``Sigma^{-1/2} vec(x)`` computed as ``vec(U^{-1/2} x V^{-1/2})``.

    Accepts a single p x q matrix or a stack (n, p, q).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != (cov.p, cov.q):
        raise DimensionMismatch(
            f"data shape {x.shape[-2:]} does not match covariance ({cov.p}, {cov.q})"
        )
    return kron_vec_apply(cov.u_inv_sqrt, cov.v_inv_sqrt, x)


def center_by_class(x, y):
    """Subtract each class mean from its samples.

    Returns ``(labels, means, residuals)`` where ``labels`` is the sorted array
    of classes present and ``means[k]`` the mean of class ``labels[k]``. A
    singleton class contributes a zero residual; at least one class must
    have two or more samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    labels, counts = np.unique(y, return_counts=True)
    if counts.sum() <= labels.size:
        raise ClassTooSmall("no class has 2 samples, so there are no residuals")
    means = np.stack([x[y == k].mean(axis=0) for k in labels])
    index = np.searchsorted(labels, y)
    return labels, means, x - means[index]


def default_penalties(n, p, q, scale=0.5):
    """Penalties ``scale * sqrt(log p / (n q))`` and ``scale * sqrt(log q / (n p))``."""
    return scale * np.sqrt(np.log(p) / (n * q)), scale * np.sqrt(np.log(q) / (n * p))


def kron_loglik(residuals, u, v):
    """Matrix-normal log-likelihood of zero-mean residuals, up to a constant."""
    r = np.asarray(residuals, dtype=float)
    n, p, q = r.shape
    _, ldu = np.linalg.slogdet(u)
    _, ldv = np.linalg.slogdet(v)
    w = np.linalg.solve(u, r)  # U^{-1} r
    quad = np.einsum("nij,nij->", w @ np.linalg.inv(v), r)
    return -0.5 * (n * q * ldu + n * p * ldv + quad)


def _row_gram(r, v):
    n, _, q = r.shape
    w = r @ np.linalg.inv(v)
    s = np.tensordot(w, r, axes=([0, 2], [0, 2])) / (n * q)
    return (s + s.T) / 2


def _col_gram(r, u):
    n, p, _ = r.shape
    w = np.linalg.solve(u, r)
    s = np.tensordot(r, w, axes=([0, 1], [0, 1])) / (n * p)
    return (s + s.T) / 2


def _check_floor(s, name):
    w = np.linalg.eigvalsh(s)
    if not np.all(np.isfinite(w)) or w[-1] <= 0 or w[0] <= EIG_FLOOR * w[-1]:
        raise NotPositiveDefinite(f"{name} estimate is singular or indefinite")
    return s


def _rel_change(new, old):
    return np.linalg.norm(new - old) / max(np.linalg.norm(old), np.finfo(float).tiny)


def _alternate(residuals, update_u, update_v, cfg, history=None):
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 3 or r.shape[0] < 1:
        raise DimensionMismatch("residuals must be a nonempty stack (N, p, q)")
    _, p, q = r.shape
    u, v = np.eye(p), np.eye(q)
    for it in range(1, cfg.max_iter + 1):
        u_new = _check_floor(update_u(_row_gram(r, v)), "row factor")
        if history is not None:
            history.append(kron_loglik(r, u_new, v))
        v_new = _check_floor(update_v(_col_gram(r, u_new)), "column factor")
        if history is not None:
            history.append(kron_loglik(r, u_new, v_new))
        c = np.trace(u_new) / p
        u_new, v_new = u_new / c, v_new * c
        change = max(_rel_change(u_new, u), _rel_change(v_new, v))
        u, v = u_new, v_new
        if it > 1 and change < cfg.tol:
            return KroneckerCovariance.from_factors(u, v, n_iter=it)
    raise NoConvergence(
        f"{cfg.method} covariance estimate did not converge in {cfg.max_iter} iterations"
    )


def estimate_flipflop(residuals, cfg=None, history=None):
    """Flip-flop MLE of (U, V) with a ridge on the column factor.

    The ridge defaults to ``1e-3 * trace(S_v) / q`` for the current column
    Gram ``S_v``; ``cfg.ridge = 0`` gives the unpenalized MLE. When ``history``
    is a list, the log-likelihood after every half-step is appended to it.
    """
    cfg = cfg or CovEstimatorConfig(method="flipflop-ridge")

    def update_v(s):
        ridge = 1e-3 * np.trace(s) / s.shape[0] if cfg.ridge is None else cfg.ridge
        return s + ridge * np.eye(s.shape[0])

    return _alternate(residuals, lambda s: s, update_v, cfg, history)


def estimate_diagonal(residuals, cfg=None):
    cfg = cfg or CovEstimatorConfig(method="diagonal")

    def diag(s):
        return np.diag(np.diag(s))

    return _alternate(residuals, diag, diag, cfg)


def _glasso_cov(s, penalty, cfg, name):
    """Graphical lasso on the correlation of ``s``, mapped back to ``s``'s scale."""
    d = np.sqrt(np.diag(s))
    if not np.all(d > 0):
        raise NotPositiveDefinite(f"{name} Gram matrix has a zero diagonal entry")
    corr = s / np.outer(d, d)
    if penalty > 0 and s.shape[0] > 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            try:
                _, prec = graphical_lasso(
                    corr, penalty, mode="cd", tol=cfg.glasso_tol,
                    max_iter=cfg.glasso_max_iter,
                )
            except FloatingPointError as exc:
                raise NotPositiveDefinite(f"graphical lasso failed on {name}") from exc
        prec = (prec + prec.T) / 2
        corr = np.linalg.inv(_check_floor(prec, f"{name} precision"))
        corr = (corr + corr.T) / 2
    return corr * np.outer(d, d)


def estimate_gemini(residuals, cfg=None):
    """Sparse-precision estimate of (U, V) by alternating graphical lasso."""
    cfg = cfg or CovEstimatorConfig()
    n, p, q = np.shape(residuals)
    lam_u, lam_v = default_penalties(n, p, q, cfg.penalty_scale)
    if cfg.row_penalty is not None:
        lam_u = cfg.row_penalty
    if cfg.col_penalty is not None:
        lam_v = cfg.col_penalty
    return _alternate(
        residuals,
        lambda s: _glasso_cov(s, lam_u, cfg, "row"),
        lambda s: _glasso_cov(s, lam_v, cfg, "column"),
        cfg,
    )


def estimate_covariance(residuals, cfg):
    if cfg.method == "gemini":
        return estimate_gemini(residuals, cfg)
    if cfg.method == "flipflop-ridge":
        return estimate_flipflop(residuals, cfg)
    if cfg.method == "diagonal":
        return estimate_diagonal(residuals, cfg)
    u, v = np.asarray(cfg.u), np.asarray(cfg.v)
    _, p, q = np.shape(residuals)
    if u.shape != (p, p) or v.shape != (q, q):
        raise DimensionMismatch("known factors do not match the data shape")
    return KroneckerCovariance.from_factors(u, v)

"""Fixed-grid NPMLE of a mixing distribution and posterior-mean shrinkage.

Each coordinate mean ``zbar_j`` is modeled as ``N(m_j, 1/n)`` with
``m_j ~ G``. ``G`` is approximated by weights on an equally spaced grid of
atoms and fitted by maximizing the marginal log-likelihood
``sum_j log sum_l w_l phi(zbar_j; nu_l, 1/n)``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateDensity, SchemaError

log = logging.getLogger(__name__)

SOLVERS = ("em", "frank-wolfe")
_LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class NpmleConfig:
    grid_size: int = 300
    grid_padding: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-8
    solver: str = "em"
    truncate: float = 1e-12

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.grid_padding < 0:
            raise ValueError("grid_padding must be nonnegative")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown npmle config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ScaledMeanObservations:
    """Coordinate-wise means of whitened samples for one class."""

    zbar: np.ndarray
    n: int
    label: int = 1

    def __post_init__(self):
        z = np.asarray(self.zbar, dtype=float).ravel()
        if z.size == 0 or not np.all(np.isfinite(z)):
            raise ValueError("zbar must be a nonempty finite vector")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        object.__setattr__(self, "zbar", z)

    @property
    def sigma(self):
        return 1.0 / np.sqrt(self.n)


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """Discrete distribution with weights on strictly increasing atoms."""

    atoms: np.ndarray
    weights: np.ndarray
    loglik: float = float("nan")
    n_iter: int = 0
    converged: bool = True

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.ndim != 1 or a.shape != w.shape or a.size == 0:
            raise SchemaError("atoms and weights must be equal-length vectors")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))):
            raise SchemaError("mixing distribution has non-finite entries")
        if np.any(np.diff(a) <= 0):
            raise SchemaError("atoms must be strictly increasing")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-10:
            raise SchemaError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    def mean(self):
        return float(self.atoms @ self.weights)

    def to_dict(self):
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["atoms"]), np.asarray(d["weights"]))


def build_grid(obs, cfg=None):
    """Equally spaced atoms over the data range widened by ``padding * sigma``."""
    cfg = cfg or NpmleConfig()
    pad = cfg.grid_padding * obs.sigma
    lo, hi = obs.zbar.min() - pad, obs.zbar.max() + pad
    if hi - lo <= 0:
        lo, hi = lo - obs.sigma, hi + obs.sigma
    return np.linspace(lo, hi, cfg.grid_size)


def log_component_density(zbar, atoms, n):
    """``log phi(zbar_j; nu_l, 1/n)`` as a (J, L) array."""
    d = np.asarray(zbar, dtype=float)[:, None] - np.asarray(atoms, dtype=float)[None, :]
    return 0.5 * (np.log(n) - _LOG_2PI) - 0.5 * n * d * d


def marginal_loglik(obs, g):
    logphi = log_component_density(obs.zbar, g.atoms, obs.n)
    with np.errstate(divide="ignore"):
        return float(logsumexp(logphi + np.log(g.weights), axis=1).sum())


def _scaled_likelihood(obs, atoms):
    logphi = log_component_density(obs.zbar, atoms, obs.n)
    shift = logphi.max(axis=1)
    return np.exp(logphi - shift[:, None]), float(shift.sum())


def _loglik(f, shift):
    return float(np.log(f).sum()) + shift


def _converged(new, old, tol):
    return abs(new - old) <= tol * max(abs(new), 1.0)


def npmle_em(lik, shift=0.0, weights=None, max_iter=1000, tol=1e-8, history=None):
    """EM iterations for mixture weights given the (J, L) likelihood matrix.

    ``lik`` may be row-rescaled; ``shift`` is the total log scale removed so
    reported log-likelihoods are on the original scale. Returns
    ``(weights, loglik, n_iter, converged)``.
    """
    n_obs, n_atoms = lik.shape
    w = np.full(n_atoms, 1.0 / n_atoms) if weights is None else np.array(weights, float)
    tiny = np.finfo(float).tiny
    f = np.maximum(lik @ w, tiny)
    ll = _loglik(f, shift)
    if history is not None:
        history.append(ll)
    for it in range(1, max_iter + 1):
        w = w * (lik.T @ (1.0 / f)) / n_obs
        w /= w.sum()
        f = np.maximum(lik @ w, tiny)
        ll_new = _loglik(f, shift)
        if history is not None:
            history.append(ll_new)
        done = _converged(ll_new, ll, tol)
        ll = ll_new
        if done:
            return w, ll, it, True
    return w, ll, max_iter, False


def _line_search(f, d, iters=60):
    # maximize sum log(f + a d) over a in [0, 1]; the derivative is decreasing
    def slope(a):
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.sum(d / (f + a * d)))

    if slope(1.0) >= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


def npmle_frank_wolfe(lik, shift=0.0, weights=None, max_iter=1000, tol=1e-8, history=None):
    """Vertex-direction (Frank-Wolfe) ascent for the mixture weights."""
    n_obs, n_atoms = lik.shape
    w = np.full(n_atoms, 1.0 / n_atoms) if weights is None else np.array(weights, float)
    tiny = np.finfo(float).tiny
    f = np.maximum(lik @ w, tiny)
    ll = _loglik(f, shift)
    if history is not None:
        history.append(ll)
    for it in range(1, max_iter + 1):
        grad = lik.T @ (1.0 / f)
        best = int(np.argmax(grad))
        # the directional derivative toward vertex `best` is grad[best] - n_obs
        if grad[best] <= n_obs * (1 + tol):
            return w, ll, it, True
        alpha = _line_search(f, lik[:, best] - f)
        w = (1 - alpha) * w
        w[best] += alpha
        f = np.maximum(lik @ w, tiny)
        ll_new = _loglik(f, shift)
        if history is not None:
            history.append(ll_new)
        done = _converged(ll_new, ll, tol)
        ll = ll_new
        if done:
            return w, ll, it, True
    return w, ll, max_iter, False


def fit_npmle(obs, cfg=None, history=None):
    """Fit the grid NPMLE of the mixing distribution for ``obs``.

    On hitting ``cfg.max_iter`` the last iterate is returned with
    ``converged=False``.
    """
    cfg = cfg or NpmleConfig()
    atoms = build_grid(obs, cfg)
    lik, shift = _scaled_likelihood(obs, atoms)
    solve = npmle_em if cfg.solver == "em" else npmle_frank_wolfe
    w, ll, n_iter, ok = solve(lik, shift, None, cfg.max_iter, cfg.tol, history)
    if not ok:
        log.debug("NPMLE %s stopped after %d iterations", cfg.solver, cfg.max_iter)
    w = np.where(w < cfg.truncate, 0.0, w)
    w /= w.sum()
    return MixingDistribution(atoms, w, loglik=ll, n_iter=n_iter, converged=ok)


def posterior_means(obs, g):
    """Posterior means ``E[m | zbar_j]`` under the fitted mixing distribution."""
    logphi = log_component_density(obs.zbar, g.atoms, obs.n)
    with np.errstate(divide="ignore"):
        logpost = logphi + np.log(g.weights)
    top = logpost.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DegenerateDensity("mixture density underflows for some observations")
    post = np.exp(logpost - top)
    return (post @ g.atoms) / post.sum(axis=1)


def shrink(zbar, n, cfg=None):
    """Convenience wrapper: fit on ``zbar`` and return ``(posterior_means, G)``."""
    obs = ScaledMeanObservations(zbar, n)
    g = fit_npmle(obs, cfg)
    return posterior_means(obs, g), g

"""NPMLDA: linear discriminant analysis for matrix data with NPMLE-shrunken
whitened class means.

Training pipeline:

1. estimate the Kronecker covariance factors from pooled class residuals;
2. whiten every sample, ``z_i = vec(U^{-1/2} X_i V^{-1/2})``;
3. average the whitened samples within each class;
4. fit a grid NPMLE of the mixing distribution of each class's coordinates;
5. replace each coordinate mean by its posterior mean.

Class priors are the training proportions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch, InsufficientClasses
from .kroncov import (
    CovEstimatorConfig,
    KroneckerCovariance,
    center_by_class,
    estimate_covariance,
    whiten,
)
from .matnorm import MatrixDataset, unvec
from .npmle import MixingDistribution, NpmleConfig, ScaledMeanObservations, fit_npmle, posterior_means


@dataclass(frozen=True, eq=False)
class TrainedModel:
    labels: np.ndarray
    priors: np.ndarray
    cov: KroneckerCovariance
    scaled_means: np.ndarray  # (K, p*q)
    counts: np.ndarray
    mixing: tuple[MixingDistribution, ...] | None = None
    method: str = "npmlda"
    configs: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.cov.p

    @property
    def q(self):
        return self.cov.q

    @property
    def n_classes(self):
        return len(self.labels)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if self.n_classes == 2:
            delta = decision_function(self, x)
            return np.where(delta >= 0, self.labels[0], self.labels[1])
        return self.labels[np.argmax(log_posterior(self, x), axis=-1)]


@dataclass(frozen=True)
class DiscriminantReport:
    delta: float
    predicted: int
    per_class_log_posterior: np.ndarray


def _as_xy(data, y=None):
    if isinstance(data, MatrixDataset):
        return data.x, data.y
    return np.asarray(data, dtype=float), np.asarray(y)


def _fit_common(x, y, cov_cfg):
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise DimensionMismatch("training data must have shape (n, p, q)")
    if np.unique(y).size < 2:
        raise InsufficientClasses("at least two classes are required")
    labels, _, residuals = center_by_class(x, y)
    cov = estimate_covariance(residuals, cov_cfg)
    z = whiten(x, cov)
    counts = np.array([np.sum(y == k) for k in labels])
    zbar = np.stack([z[y == k].mean(axis=0) for k in labels])
    return labels, counts, cov, zbar


def train(data, y=None, cov_cfg=None, npmle_cfg=None):
    """Fit NPMLDA on ``data`` (a MatrixDataset, or an (n, p, q) array with labels ``y``)."""
    cov_cfg = cov_cfg or CovEstimatorConfig()
    npmle_cfg = npmle_cfg or NpmleConfig()
    x, y = _as_xy(data, y)
    labels, counts, cov, zbar = _fit_common(x, y, cov_cfg)
    means, mixing = [], []
    for k, n_k in enumerate(counts):
        obs = ScaledMeanObservations(zbar[k], int(n_k), int(labels[k]))
        g = fit_npmle(obs, npmle_cfg)
        mixing.append(g)
        means.append(posterior_means(obs, g))
    return TrainedModel(
        labels=labels,
        priors=counts / counts.sum(),
        cov=cov,
        scaled_means=np.stack(means),
        counts=counts,
        mixing=tuple(mixing),
        method="npmlda",
        configs={"cov": cov_cfg.to_dict(), "npmle": npmle_cfg.to_dict()},
    )


def naive_lda_train(data, y=None, cov_cfg=None):
    """Same pipeline as :func:`train` but keeps the raw whitened class means."""
    cov_cfg = cov_cfg or CovEstimatorConfig()
    x, y = _as_xy(data, y)
    labels, counts, cov, zbar = _fit_common(x, y, cov_cfg)
    return TrainedModel(
        labels=labels,
        priors=counts / counts.sum(),
        cov=cov,
        scaled_means=zbar,
        counts=counts,
        method="naive",
        configs={"cov": cov_cfg.to_dict()},
    )


def _whitened(model, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != (model.p, model.q):
        raise DimensionMismatch(
            f"input shape {x.shape[-2:]} does not match model ({model.p}, {model.q})"
        )
    return whiten(x, model.cov)


def decision_function(model, x):
    """Binary score ``(w - (m1 + m2)/2)' (m1 - m2) - log(pi2 / pi1)``.

    ``x`` may be one p x q matrix or a stack; class 1 is chosen when the
    score is nonnegative.
    """
    if model.n_classes != 2:
        raise ValueError("the binary discriminant needs exactly two classes")
    w = _whitened(model, x)
    m1, m2 = model.scaled_means
    return (w - (m1 + m2) / 2) @ (m1 - m2) - np.log(model.priors[1] / model.priors[0])


def log_posterior(model, x):
    """Normalized class log-posteriors ``log pi_k - |w - m_k|^2 / 2``."""
    w = _whitened(model, x)
    d2 = ((w[..., None, :] - model.scaled_means) ** 2).sum(axis=-1)
    s = np.log(model.priors) - 0.5 * d2
    return s - logsumexp(s, axis=-1, keepdims=True)


def discriminant(model, x):
    delta = float(decision_function(model, x))
    lp = log_posterior(model, x)
    predicted = model.labels[0] if delta >= 0 else model.labels[1]
    return DiscriminantReport(delta, int(predicted), lp)


def classify_multiclass(model, x):
    lp = log_posterior(model, x)
    k = int(np.argmax(lp))  # first maximum, i.e. smallest class index on ties
    delta = float(lp[0] - lp[1]) if model.n_classes == 2 else float("nan")
    return DiscriminantReport(delta, int(model.labels[k]), lp)


def estimated_B(model):
    """Coefficient matrix ``U^{-1/2} unvec(m1 - m2) V^{-1/2}``."""
    if model.n_classes != 2:
        raise ValueError("estimated_B needs exactly two classes")
    diff = unvec(model.scaled_means[0] - model.scaled_means[1], model.p, model.q)
    return model.cov.u_inv_sqrt @ diff @ model.cov.v_inv_sqrt


@dataclass(frozen=True, eq=False)
class OracleParams:
    means: np.ndarray  # (2, p, q)
    u: np.ndarray
    v: np.ndarray
    priors: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))

    @classmethod
    def from_truth(cls, truth):
        return cls(truth.means, truth.u, truth.v, truth.priors)

    def coefficient(self):
        d = self.means[0] - self.means[1]
        return np.linalg.solve(self.u, np.linalg.solve(self.v.T, d.T).T)


def oracle_delta(params, x):
    """Bayes discriminant ``tr(B' (x - (M1 + M2)/2))`` with the true parameters."""
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != params.means.shape[-2:]:
        raise DimensionMismatch("input shape does not match oracle parameters")
    b = params.coefficient()
    mid = (params.means[0] + params.means[1]) / 2
    return np.einsum("...ij,ij->...", x - mid, b)


def oracle_classify(params, x):
    """Class 1 when the Bayes discriminant is at least ``log(pi2/pi1)``, else 2."""
    thresh = np.log(params.priors[1] / params.priors[0])
    return np.where(oracle_delta(params, x) >= thresh, 1, 2)

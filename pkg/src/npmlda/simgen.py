"""Simulation scenarios: cross-pattern coefficient matrices and covariance models.

Group 1 has mean zero and group 2 has mean ``-U B V``, so that
``B = U^{-1} (M1 - M2) V^{-1}`` is the coefficient matrix of the Bayes rule.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import PatternTooLarge
from .matnorm import MatrixDataset, make_rng, sample_matrix_normal

SIZE_FRACTIONS = {"small": 1 / 16, "medium": 1 / 8, "large": 1 / 4}
SPARSITIES = ("sparse", "dense")
NOISE_HIGH = 0.1
MODEL_DECAY = {1: (0.0, 0.0), 2: (0.0, 0.5), 3: (0.25, 0.25)}
SCALE = 0.2

# stream ids under (master_seed, replication)
_STREAM_B, _STREAM_TRAIN, _STREAM_TEST = 0, 1, 2


@dataclass(frozen=True)
class PatternSpec:
    sparsity: str = "dense"
    size: str = "large"
    theta: float = 1.0
    p: int = 16
    q: int = 16
    noise_seed: int = 0

    def __post_init__(self):
        if self.sparsity not in SPARSITIES:
            raise ValueError(f"sparsity must be one of {SPARSITIES}")
        if self.size not in SIZE_FRACTIONS:
            raise ValueError(f"size must be one of {tuple(SIZE_FRACTIONS)}")
        if not (np.isfinite(self.theta) and self.theta >= 0):
            raise ValueError("theta must be a nonnegative number")
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    model: int = 1
    pattern: PatternSpec = field(default_factory=PatternSpec)
    n_train: int = 100
    n_test: int = 100
    replications: int = 20
    master_seed: int = 0

    def __post_init__(self):
        if self.model not in MODEL_DECAY:
            raise ValueError("model must be 1, 2 or 3")
        if min(self.n_train, self.n_test, self.replications) < 1:
            raise ValueError("sample counts and replications must be at least 1")
        if isinstance(self.pattern, dict):
            object.__setattr__(self, "pattern", PatternSpec(**self.pattern))

    @property
    def scenario_id(self):
        pat = self.pattern
        return f"model{self.model}-{pat.sparsity}-{pat.size}-theta{pat.theta:g}-p{pat.p}q{pat.q}"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        if isinstance(d.get("pattern"), dict):
            d["pattern"] = PatternSpec(**d["pattern"])
        return cls(**d)


def desk_scenario(model=1, sparsity="dense", size="large", theta=1.1, **kw):
    """p = q = 16, 100 samples per class, 20 replications."""
    pattern = PatternSpec(sparsity=sparsity, size=size, theta=theta, p=16, q=16)
    kw = {"n_train": 100, "n_test": 100, "replications": 20, **kw}
    return ScenarioConfig(model=model, pattern=pattern, **kw)


def full_scenario(model=1, sparsity="dense", size="large", theta=1.1, **kw):
    """p = q = 64, 300 samples per class, 200 replications."""
    pattern = PatternSpec(sparsity=sparsity, size=size, theta=theta, p=64, q=64)
    kw = {"n_train": 300, "n_test": 300, "replications": 200, **kw}
    return ScenarioConfig(model=model, pattern=pattern, **kw)


def _band(n, fraction):
    width = max(1, int(np.floor(fraction * n + 0.5)))
    if width > n:
        raise PatternTooLarge(f"band of width {width} does not fit in {n}")
    # centered on the 1-based index ceil(n/2)
    start = (n + 1) // 2 - 1 - (width - 1) // 2
    return slice(start, start + width)


def cross_mask(p, q, size):
    """Boolean p x q plus-shape spanning the full height and width."""
    fraction = SIZE_FRACTIONS[size]
    mask = np.zeros((p, q), dtype=bool)
    mask[_band(p, fraction), :] = True
    mask[:, _band(q, fraction)] = True
    return mask


def make_B(spec):
    mask = cross_mask(spec.p, spec.q, spec.size)
    if spec.sparsity == "dense":
        b = make_rng(spec.noise_seed).uniform(0.0, NOISE_HIGH, size=(spec.p, spec.q))
    else:
        b = np.zeros((spec.p, spec.q))
    b[mask] = spec.theta
    return b


def ar1(n, rho, scale=SCALE):
    idx = np.arange(n)
    return scale * rho ** np.abs(idx[:, None] - idx[None, :])


def make_model_cov(model, p, q):
    """Covariance factors of models 1-3 (independent, AR(1) columns, AR(1) both)."""
    if model not in MODEL_DECAY:
        raise ValueError("model must be 1, 2 or 3")
    rho_u, rho_v = MODEL_DECAY[model]
    return ar1(p, rho_u), ar1(q, rho_v)


@dataclass(frozen=True, eq=False)
class SimulationTruth:
    means: np.ndarray  # (2, p, q)
    u: np.ndarray
    v: np.ndarray
    b: np.ndarray
    priors: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))


def replication_B(cfg, replication):
    seed = int(make_rng(cfg.master_seed, replication, _STREAM_B).integers(2**63))
    return make_B(replace(cfg.pattern, noise_seed=seed))


def make_dataset(cfg, replication=0):
    """Generate ``(train, test, truth)`` for one replication of a scenario."""
    pat = cfg.pattern
    u, v = make_model_cov(cfg.model, pat.p, pat.q)
    b = replication_B(cfg, replication)
    m1 = np.zeros((pat.p, pat.q))
    m2 = -u @ b @ v
    truth = SimulationTruth(np.stack([m1, m2]), u, v, b)

    def draw(stream, n):
        xs = [
            sample_matrix_normal(m, u, v, make_rng(cfg.master_seed, replication, stream, k), n)
            for k, m in enumerate((m1, m2))
        ]
        y = np.repeat([1, 2], n)
        return MatrixDataset(np.concatenate(xs), y)

    return draw(_STREAM_TRAIN, cfg.n_train), draw(_STREAM_TEST, cfg.n_test), truth

"""Matrix-variate LDA with nonparametric empirical Bayes mean estimation."""

from .classifier import (
    DiscriminantReport,
    OracleParams,
    TrainedModel,
    classify_multiclass,
    decision_function,
    discriminant,
    estimated_B,
    log_posterior,
    naive_lda_train,
    oracle_classify,
    train,
)
from .kroncov import CovEstimatorConfig, KroneckerCovariance, estimate_covariance, whiten
from .matnorm import MatrixDataset, kron_vec_apply, sample_matrix_normal, spd_inv_sqrt, unvec, vec
from .npmle import MixingDistribution, NpmleConfig, ScaledMeanObservations, fit_npmle, posterior_means
from .simgen import PatternSpec, ScenarioConfig, make_B, make_dataset, make_model_cov

__version__ = "0.1.0"

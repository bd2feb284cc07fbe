"""Single-pass streaming clustering for Gaussian mixtures with an unknown
number of components, plus diagnostics and a benchmark harness."""

from asugs.engine import (
    ClusterBook,
    ConcentrationState,
    EngineConfig,
    RunTrace,
    StepRecord,
    run,
)
from asugs.mixture import GaussianMixture
from asugs.niw import (
    NiwPosterior,
    PriorConfig,
    log_gamma_ratio,
    log_predictive_density,
    posterior_update,
    prior_predictive,
)

__all__ = [
    "ClusterBook",
    "ConcentrationState",
    "EngineConfig",
    "GaussianMixture",
    "NiwPosterior",
    "PriorConfig",
    "RunTrace",
    "StepRecord",
    "log_gamma_ratio",
    "log_predictive_density",
    "posterior_update",
    "prior_predictive",
    "run",
]

__version__ = "0.1.0"

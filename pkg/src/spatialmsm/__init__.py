"""Bayesian spatial illness-death survival models.

Weibull proportional-hazards transition intensities with region-level random
effects under a multivariate Leroux Gaussian Markov random field, fitted by
adaptive MCMC, with posterior sojourn survival, transition/occupation
probabilities and cumulative incidence functions per region.
"""

from .exceptions import (
    ConfigError,
    DataError,
    NotPositiveDefiniteError,
    NumericalError,
    QuadratureError,
    SpatialMSMError,
)
from .gmrf import (
    GAMMA_MAX,
    TRANSITIONS,
    BetweenCov,
    LerouxMix,
    RandomEffects,
    joint_precision,
    log_density,
    sample,
    within_precision,
)
from .graph import SpatialGraph, grid_graph, is_connected, load_adjacency
from .hazard import TransitionParams, cum_hazard, hazard, inv_cum_hazard, linear_predictor
from .likelihood import (
    CohortData,
    ModelState,
    Subject,
    cohort_loglik,
    cohort_loglik_grad,
    subject_loglik,
)
from .mcmc import (
    PosteriorDraws,
    SamplerConfig,
    diagnostics,
    log_posterior,
    log_posterior_grad,
    map_estimate,
    run,
)
from .outcomes import (
    OutcomeGrid,
    Profile,
    cumulative_incidence,
    posterior_summary,
    sojourn_survival,
    transition_probability,
)
from .prior import PriorConfig, from_unconstrained, log_prior, to_unconstrained
from .simulate import CovariateGen, SimConfig, empirical_outcomes, simulate_cohort

__version__ = "0.1.0"

__all__ = [
    "BetweenCov",
    "CohortData",
    "ConfigError",
    "CovariateGen",
    "DataError",
    "GAMMA_MAX",
    "LerouxMix",
    "ModelState",
    "NotPositiveDefiniteError",
    "NumericalError",
    "OutcomeGrid",
    "PosteriorDraws",
    "PriorConfig",
    "Profile",
    "QuadratureError",
    "RandomEffects",
    "SamplerConfig",
    "SimConfig",
    "SpatialGraph",
    "SpatialMSMError",
    "Subject",
    "TRANSITIONS",
    "TransitionParams",
    "cohort_loglik",
    "cohort_loglik_grad",
    "cumulative_incidence",
    "diagnostics",
    "empirical_outcomes",
    "from_unconstrained",
    "grid_graph",
    "hazard",
    "cum_hazard",
    "inv_cum_hazard",
    "is_connected",
    "joint_precision",
    "linear_predictor",
    "load_adjacency",
    "log_density",
    "log_posterior",
    "log_posterior_grad",
    "log_prior",
    "map_estimate",
    "posterior_summary",
    "run",
    "sample",
    "simulate_cohort",
    "sojourn_survival",
    "subject_loglik",
    "to_unconstrained",
    "transition_probability",
    "within_precision",
]

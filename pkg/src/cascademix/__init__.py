"""Two-layer diffusion network inference from continuous-time cascades.

Each node draws its incoming transmission rates, cascade by cascade, either
from a sparse network ``theta`` (probability ``pi[i]``) or from a low-rank
network ``psi``. The package simulates such data and recovers
``(theta, psi, pi)`` with a constrained EM algorithm.
"""

from .errors import (CascadeMixError, DegenerateData, EmptySupport, GenerationFailure, SourceNode,
                     SvdFailure, ValidationError)
from .estimator import (EmConfig, FitResult, IdentifiabilityReport, baseline_fit, fit,
                        identifiability_diagnostic, tune_rho, update_pi, update_psi, update_theta)
from .generate import BA, ER, SBM, GenSpec, gen_overlap_pair, gen_params, gen_psi, gen_theta, impute_connectivity
from .hazard import HazardModel, hazard, log_density, log_survival, sample_delay, sample_delays
from .likelihood import (Cascade, CascadeBatch, CascadeSet, cascade_loglik, grad_column, log_p_activated,
                         log_p_censored)
from .metrics import EvalReport, evaluate, mae_pi, mae_rates, overlap, topology_metrics
from .mixture import MixtureParams, e_step, elbo, grad_q1, grad_q2, marginal_loglik, q_components
from .simulate import FixedSource, SimSpec, UniformSources, WeightedSources, simulate_batch, simulate_cascade

__all__ = [
    "BA", "ER", "SBM", "Cascade", "CascadeBatch", "CascadeMixError", "CascadeSet", "DegenerateData",
    "EmConfig", "EmptySupport", "EvalReport", "FitResult", "FixedSource", "GenSpec", "GenerationFailure",
    "HazardModel", "IdentifiabilityReport", "MixtureParams", "SimSpec", "SourceNode", "SvdFailure",
    "UniformSources", "ValidationError", "WeightedSources", "baseline_fit", "cascade_loglik", "e_step",
    "elbo", "evaluate", "fit", "gen_overlap_pair", "gen_params", "gen_psi", "gen_theta", "grad_column",
    "grad_q1", "grad_q2", "hazard", "identifiability_diagnostic", "impute_connectivity", "log_density",
    "log_p_activated", "log_p_censored", "log_survival", "mae_pi", "mae_rates", "marginal_loglik",
    "overlap", "q_components", "sample_delay", "sample_delays", "simulate_batch", "simulate_cascade",
    "topology_metrics", "tune_rho", "update_pi", "update_psi", "update_theta",
]

"""Multi-period correlated-default Monte Carlo with contagion on interbank exposure networks."""

__version__ = "0.1.0"

from .baselines import furfine_cascade, gen_debtrank
from .engine import LossDistribution, SimulationConfig, run_path, run_scenarios, run_simulation
from .inference import AggregateMarginals, InferenceConfig, InferenceError, generate_ensemble, infer_network
from .io import bundled, load_banks, load_network
from .kernel import (
    CalibrationError,
    DomainError,
    FactorizationError,
    bivariate_norm_cdf,
    cholesky_lower,
    implied_double_default_pd,
    merton_pd,
    merton_sigma,
    norm_cdf,
    norm_inv,
)
from .markov import TwoNodeParams, evolve, state_loss_distribution, strong_contagion_scan, transition_matrix
from .measures import ScenarioOverride, pd_beta, pd_impact, pd_rank, summarize
from .model import BankNode, DiscountCurve, ExposureNetwork, SystemState, apply_impact, impact

__all__ = [
    "AggregateMarginals",
    "BankNode",
    "CalibrationError",
    "DiscountCurve",
    "DomainError",
    "ExposureNetwork",
    "FactorizationError",
    "InferenceConfig",
    "InferenceError",
    "LossDistribution",
    "ScenarioOverride",
    "SimulationConfig",
    "SystemState",
    "TwoNodeParams",
    "apply_impact",
    "bivariate_norm_cdf",
    "bundled",
    "cholesky_lower",
    "evolve",
    "furfine_cascade",
    "gen_debtrank",
    "generate_ensemble",
    "impact",
    "implied_double_default_pd",
    "infer_network",
    "load_banks",
    "load_network",
    "merton_pd",
    "merton_sigma",
    "norm_cdf",
    "norm_inv",
    "pd_beta",
    "pd_impact",
    "pd_rank",
    "run_path",
    "run_scenarios",
    "run_simulation",
    "state_loss_distribution",
    "strong_contagion_scan",
    "summarize",
    "transition_matrix",
]

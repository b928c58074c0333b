"""Posterior-start ODE sampling for diffusion bridges."""

from ._core import (
    BridgeSchedule,
    ConfigError,
    ConvergenceError,
    DomainError,
    GaussianMixtureModel,
    GaussianModel,
    NonFiniteStateError,
    SingularTimeError,
    TimeGrid,
    check_theorem1,
    check_theorem2,
    check_theorem3,
    convergence_order,
    expected_kl,
    expected_nfe,
    gaussian_flow_oracle,
    h_drift,
    kl_gaussian,
    make_time_grid,
    optimal_gaussian_projection,
    pf_ode_drift,
    sample,
    score_from_predictor,
    sde_limit_drift,
    start_summary,
    wasserstein1_1d,
)

__version__ = "0.1.0"

"""Free molecular and damped free molecular gas flow in slab and disk
geometry: explicit steady states, boundary-flux renewal solvers,
characteristic transport evaluation, and stochastic billiard Monte
Carlo, with decay-rate verification tools."""

__version__ = "0.1.0"

from .analysis import RateFit, envelope_check, fit_decay_rate, \
    lln_experiment
from .config import ConfigError, SimConfig
from .flux_solver import FluxHistory, InitialData, ResidualError, \
    SolverConfig, deviation_flux, flux_residual, mean_initial_density, \
    solve_flux
from .geometry import Wall, backward_exit_time, bounce_count, \
    specular_orbit
from .kernels import maxwellian, reduced_maxwellian, sample_flight_time, \
    transition_pdf_value
from .montecarlo import ParticleEnsemble, advance, density_snapshot, \
    empirical_flux, init_ensemble
from .steady_state import SteadyState, TemperatureProfile, compute_C_S, \
    evaluate_S, steady_boundary_flux
from .transport import DampingModel, FieldSnapshot, deviation_field_norm, \
    evaluate_damped, evaluate_g, mean_density, moments, snapshot, \
    solve_damped_flux

__all__ = [
    "ConfigError", "DampingModel", "FieldSnapshot", "FluxHistory",
    "InitialData", "ParticleEnsemble", "RateFit", "ResidualError",
    "SimConfig", "SolverConfig", "SteadyState", "TemperatureProfile",
    "Wall", "advance", "backward_exit_time", "bounce_count",
    "compute_C_S", "density_snapshot", "deviation_field_norm",
    "deviation_flux", "empirical_flux", "envelope_check", "evaluate_S",
    "evaluate_damped", "evaluate_g", "fit_decay_rate", "flux_residual",
    "init_ensemble", "lln_experiment", "maxwellian", "mean_density",
    "mean_initial_density", "moments", "reduced_maxwellian",
    "sample_flight_time", "snapshot", "solve_damped_flux", "solve_flux",
    "specular_orbit", "steady_boundary_flux", "transition_pdf_value",
    "__version__",
]

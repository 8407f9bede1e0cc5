"""SQ(d,N) load balancing: stochastic simulation, fluid model and fixed point."""
from .analysis import DecayFit, batch_means, fit_decay_rate, mean_ci, mm1k_mean_queue, paired_difference, sup_distance
from .equilibrium import EquilibriumReport, equilibrium_bounds, fixed_point, interval_index, j_star, lambda_star
from .errors import BoundaryDegeneracyError, ConfigError, ConsistencyError, InvalidStateError, StepRejected
from .experiments import EXPERIMENTS, run_experiment
from .fluid import boundary_rate_G, boundary_rate_R, drift, linear_regime_system, mass_functionals
from .integrator import IntegratorConfig, Trajectory, integrate
from .io import RunConfig, load_config
from .params import ModelParams
from .simulation import PolicySpec, SimConfig, SimResult, compare_policies, occupancy, simulate
from .state import FluidState

__version__ = "0.1.0"

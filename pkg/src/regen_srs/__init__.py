"""Monotone stochastic recursions driven by regenerative environments.

Simulation, exact finite-grid analysis and three economic applications of
``X_{t+1} = f(X_t, xi_t^{Z_t})`` with ``f`` nondecreasing in the state and
``Z`` a regenerative process.
"""
__version__ = "0.1.0"

from .drivers import (Cycle, MeanEstimate, RegenDriver, ShockLaw, aperiodicity_check, driver_from_json,
                      driver_to_json, explicit_cycle_driver, iid_driver, markov_atom_driver,
                      mean_cycle_length, word_driver)
from .engine import (CoupledRun, Trajectory, calibrate_burn_in, contraction_profile, coupled_ensemble,
                     coupled_pair, default_burn_in, embedded_samples, estimate_limit_distribution,
                     estimate_splitting, long_run_distribution, simulate, simulate_ensemble,
                     sweep_splitting)
from .errors import (AmbiguousStationaryError, BudgetExceededError, ConvergenceError, DomainMismatchError,
                     GridClosureError, SchemaError, SRSError, TailMassError, ValidationError)
from .exact import (EmbeddedChain, StationaryLaw, best_splitting_point, embedded_matrix, exact_contraction,
                    geometric_bound, limiting_mu, splitting_exact, stationary, transition_terms)
from .ordered import (DiscreteCdf, MonotoneMap, StateGrid, clamp_add_map, identity_map, pushforward,
                      reset_map, stochastic_dominance, uniform_distance, verify_monotone)

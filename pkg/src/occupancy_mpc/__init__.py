"""Occupancy-predictive climate control for a single building zone.

Submodules: ``occupancy`` (periodic Markov occupancy model), ``ingest``
(pulse logs and weather files), ``thermal`` (RC plant and discretization),
``control`` (weighted MPC and baselines), ``harness`` (closed-loop simulation).
"""

from .control import MpcConfig, solve_mpc, scheduled_controller, triggered_controller
from .errors import (ConfigError, DegeneratePosterior, DimensionMismatch, FormatError, InvalidArgument,
                     InvalidGeometry, OccupancyMpcError, ParseError, SingularCapacitance, SolverFailure)
from .harness import ScenarioConfig, compare_controllers, emit_reports, lambda_sweep, run_simulation
from .occupancy import OccupancyModel, new_model, predict, train_step, transition_matrix
from .thermal import RcNetwork, StateSpaceModel, augment, build_single_zone, discretize

__version__ = "0.1.0"

"""Nominal, tube-based robust and chance-constrained MPC for LIPM walking."""
from .model import LipmParams, LtiModel, closed_loop, deadbeat_gain, discretize_lipm
from .mpc import (ControllerFailure, CostWeights, MpcController, Tightening, nominal_controller,
                  rmpc_controller, smpc_controller)
from .polytope import Box, HPolytope, Zonotope, mrpi_exact_nilpotent, mrpi_outer_eps, rpi_check
from .qp import DenseQpSolver, QpProblem, QpSolution
from .stochastic import DisturbanceModel, inv_norm_cdf, kappa

__version__ = "0.1.0"

"""Forward-forward mean field games for opinion dynamics and voting.

Semi-Lagrangian discretization of the potential equation, exact discrete
adjoint for the density, a forward-forward time marcher, a damped fixed
point for the classical forward-backward system, and preset experiments.
"""

from .errors import *  # noqa: F401,F403
from .experiments import PRESET_IDS, Preset, median_voter, preset, victory_region
from .grid import Grid, build_grid, indicator_density
from .model import ModelParams, Pole, PoleSchedule, local_average
from .scheme import SchemeParams, adjoint_fp_step, hj_step, sl_bellman_operator
from .solver import (
    FBParams,
    Trajectory,
    cluster_count,
    mean_opinion,
    run_forward_backward,
    run_forward_forward,
    steady_state_residual,
    wasserstein_1d,
)

__version__ = "0.1.0"

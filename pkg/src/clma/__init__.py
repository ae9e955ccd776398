"""Position optimization for cross-linked movable antenna arrays in the multiuser uplink.

The array's M columns share horizontal positions ``x`` and its N rows share
vertical positions ``y``. Users transmit with the minimum power that meets
their rate targets under zero-forcing reception; the package picks ``x`` and
``y`` to minimize the total.
"""
from .channel import ApvPair, UserPathSet, channel_matrix, channel_vector
from .closed_form import construct_optimal_apvs, tightness_check, verify_cvo
from .errors import (CLMAError, ConfigError, DegenerateAnglesError, InfeasibleError,
                     InvalidInputError, SingularChannelError)
from .optimizer import (CandidateGrid, OptimizerConfig, SelectionPair, exhaustive_search,
                        grid_from_resolution, make_candidate_grid, optimize_positions)
from .receiver import rate_weights, total_power_lower_bound, total_power_zf
from .scenario import ScenarioConfig, sample_users
from .statistical import optimize_statistical, sample_realizations

__version__ = "0.1.0"

__all__ = [
    "ApvPair", "UserPathSet", "channel_matrix", "channel_vector",
    "construct_optimal_apvs", "tightness_check", "verify_cvo",
    "CLMAError", "ConfigError", "DegenerateAnglesError", "InfeasibleError",
    "InvalidInputError", "SingularChannelError",
    "CandidateGrid", "OptimizerConfig", "SelectionPair", "exhaustive_search",
    "grid_from_resolution", "make_candidate_grid", "optimize_positions",
    "rate_weights", "total_power_lower_bound", "total_power_zf",
    "ScenarioConfig", "sample_users", "optimize_statistical", "sample_realizations",
]

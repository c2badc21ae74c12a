"""Optimal water-and-fire counter-terror policies.

The dynamic problem is solved through the minimum principle with shooting
on the initial costate and cyclic coordinate descent over the two
controls; steady states come straight from the evolution function.
"""

from .ccd import CcdConfig, CcdResult, solve_low_branch, solve_multicontrol, total_cost
from .model import (BASE, QUADRATIC, DomainError, Grid, ModelParams, Trajectory, drift,
                    load_params, running_cost, switching_point)
from .steady_state import SteadyState, find_steady_states, steady_ccd

__all__ = [
    "BASE", "QUADRATIC", "CcdConfig", "CcdResult", "DomainError", "Grid", "ModelParams",
    "SteadyState", "Trajectory", "drift", "find_steady_states", "load_params", "running_cost",
    "solve_low_branch", "solve_multicontrol", "steady_ccd", "switching_point", "total_cost",
]

"""Reach-avoid games with moving targets and obstacles.

A grid-based Hamilton-Jacobi-Isaacs solver: implicit scene description,
WENO/Lax-Friedrichs numerics, a backward double-obstacle sweep, game models
with closed-form Hamiltonians, feedback strategies and analysis tools.
"""

from __future__ import annotations

from .games import (
    AttackerDefenderPlanar,
    ProblemSpec,
    SingleIntegrator,
    TimeAugmented,
    augment_time,
    builtin_problem,
    slice_augmented,
)
from .grid import Grid, GridError, ScalarField, create_grid, interpolate, read_field, slice_field, write_field
from .scene import ball, box, halfspace, sample_scene
from .solver import SolveConfig, SolveResult, solve_backward

__version__ = "0.1.0"

__all__ = [
    "AttackerDefenderPlanar",
    "Grid",
    "GridError",
    "ProblemSpec",
    "ScalarField",
    "SingleIntegrator",
    "SolveConfig",
    "SolveResult",
    "TimeAugmented",
    "augment_time",
    "ball",
    "box",
    "builtin_problem",
    "create_grid",
    "halfspace",
    "interpolate",
    "read_field",
    "sample_scene",
    "slice_augmented",
    "slice_field",
    "solve_backward",
    "write_field",
]

"""Finite-difference solver and verification toolkit for triangular reaction
cross-diffusion systems

    du/dt = Lap(u B(u, v)) + u f(u, v),    dv/dt = d_v Lap v + v g(u, v)

with zero-flux boundaries on a box in one or two dimensions.
"""

from .errors import (AssumptionViolation, CflViolation, CrossDiffError, NoSignChange,
                     NonConvergence, ParseError, StepTooLarge)
from .grid import Field, Grid
from .model import (DiffusivitySpec, ModelSpec, ReactionSpec, StarvationSpec, check_assumptions,
                    invert_A, mu, source_s, starvation_A, starvation_diffusivity, starvation_split)
from .stepper import RunResult, Scheme, SolverConfig, State, run

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "CflViolation", "CrossDiffError", "NoSignChange", "NonConvergence",
    "ParseError", "StepTooLarge", "Field", "Grid", "DiffusivitySpec", "ModelSpec", "ReactionSpec",
    "StarvationSpec", "check_assumptions", "invert_A", "mu", "source_s", "starvation_A",
    "starvation_diffusivity", "starvation_split", "RunResult", "Scheme", "SolverConfig", "State",
    "run",
]

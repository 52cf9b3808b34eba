"""Exact regularization paths for penalized convex losses.

The solver computes the full solution curve beta(rho) of

    min_beta  f(beta) + rho * ||V beta - d||_1 + rho * ||W beta - e||_+

by integrating the path ODE between kinks and processing active-set events
exactly.  Most work goes through `run_path`; problem ingredients come from
a loss model (`QuadraticLoss`, `GlmLoss`, ...) and a `ConstraintSystem`
built by the helpers in `constraints`.  The `penpath` command-line tool
wraps the same machinery around JSON problem-spec files.
"""

from . import constraints, errors, losses, oracles
from .constraints import ConstraintSystem
from .errors import PenPathError, SpecError, UnsupportedLoss
from .losses import (
    GaussianGraphicalLoss,
    GlmLoss,
    LogConcaveLoss,
    LossModel,
    QuadraticLoss,
    QuasiLoss,
)
from .path import (
    Kink,
    PathOptions,
    PathSegment,
    PathSolution,
    SetConfiguration,
    classify,
    degrees_of_freedom,
    information_criteria,
    run_path,
)
from .problemspec import ProblemSpec, parse_problem_spec

__version__ = "0.1.0"

__all__ = [
    "ConstraintSystem",
    "GaussianGraphicalLoss",
    "GlmLoss",
    "Kink",
    "LogConcaveLoss",
    "LossModel",
    "PathOptions",
    "PathSegment",
    "PathSolution",
    "PenPathError",
    "ProblemSpec",
    "QuadraticLoss",
    "QuasiLoss",
    "SetConfiguration",
    "SpecError",
    "UnsupportedLoss",
    "classify",
    "constraints",
    "degrees_of_freedom",
    "errors",
    "information_criteria",
    "losses",
    "oracles",
    "parse_problem_spec",
    "run_path",
    "__version__",
]

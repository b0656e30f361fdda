"""Source reconstruction for nonlinear parabolic equations from lateral Cauchy data.

The time dependence is expanded in an orthonormal exponential-polynomial
basis, which turns the inverse problem into an over-determined quasilinear
elliptic system.  That system is solved by Newton steps, each a
Carleman-weighted regularised least-squares problem.
"""
from .carleman import CarlemanParams
from .errors import BlowUpError, CFLError, ConfigError, NumericalError, SolverError
from .experiment import ExperimentConfig, load_config, parse_config
from .forward import BoundaryTraces, apply_noise, extract_traces, run_forward
from .grid import Grid2D
from .newton import initial_guess, iterate, metrics, reconstruct_source
from .nonlinearity import get_nonlinearity
from .phantoms import get_phantom
from .pipeline import invert, run_full, simulate
from .time_basis import TimeBasis, build_basis, stiffness

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "BoundaryTraces",
    "CFLError",
    "CarlemanParams",
    "ConfigError",
    "ExperimentConfig",
    "Grid2D",
    "NumericalError",
    "SolverError",
    "TimeBasis",
    "apply_noise",
    "build_basis",
    "extract_traces",
    "get_nonlinearity",
    "get_phantom",
    "initial_guess",
    "invert",
    "iterate",
    "load_config",
    "metrics",
    "parse_config",
    "reconstruct_source",
    "run_forward",
    "run_full",
    "simulate",
    "stiffness",
]

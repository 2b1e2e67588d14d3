"""Dynamic neuro-skin membrane: a finite-element sheet whose elements
carry displacement-sensing neurons that push traction back into the mesh,
plus the training loop that identifies per-element output weights from a
recorded response.
"""

from .errors import (
    AssemblyRankError,
    ConfigError,
    EvaluationError,
    NeuroSkinError,
    SimulationDivergedError,
)
from .fe import Material, NewmarkIntegrator, assemble_global
from .lbfgsb import Bounds, LbfgsbOptions, MinimizeResult, minimize
from .mesh import Mesh, build_grid_mesh
from .neuro import ActivationKind, NeuroLayout, broadcast_design
from .objective import TrainingProblem, mse, objective_and_gradient, rmse
from .simulation import Excitation, SimConfig, TimeSeries, simulate

__version__ = "0.1.0"

__all__ = [
    "ActivationKind",
    "AssemblyRankError",
    "Bounds",
    "ConfigError",
    "EvaluationError",
    "Excitation",
    "LbfgsbOptions",
    "Material",
    "Mesh",
    "MinimizeResult",
    "NeuroLayout",
    "NeuroSkinError",
    "NewmarkIntegrator",
    "SimConfig",
    "SimulationDivergedError",
    "TimeSeries",
    "TrainingProblem",
    "broadcast_design",
    "build_grid_mesh",
    "minimize",
    "mse",
    "objective_and_gradient",
    "rmse",
    "simulate",
]

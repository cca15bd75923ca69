"""hp-adaptive mixed finite elements for elastoplasticity with linear kinematic hardening."""

from .adaptivity import AdaptConfig, Problem, drive
from .assembly import LoadData, Spaces, assemble
from .bench import ExperimentConfig, fit_rate, load_config, run
from .estimator import estimate
from .mesh import QuadMesh, build_rectangle_mesh, p_refine, refine, uniform_overkill
from .solver import SolverConfig, solve_auxiliary, solve_mixed
from .tensor_core import Material

__all__ = [
    "AdaptConfig", "ExperimentConfig", "LoadData", "Material", "Problem", "QuadMesh",
    "SolverConfig", "Spaces", "assemble", "build_rectangle_mesh", "drive", "estimate",
    "fit_rate", "load_config", "p_refine", "refine", "run", "solve_auxiliary",
    "solve_mixed", "uniform_overkill",
]
__version__ = "0.1.0"

from . import interfaces, records
from .bridge import ProgressBridge
from .config import RunConfig, ScfConfig, dump_config, load_config, parse_config
from .constants import check_assumption, constants_report, hardy_cube_validate
from .density import BlochDensityMatrix, EnergyBreakdown
from .errors import (
    ConfigError, DataMismatchError, DiracFockError, ModelFailureError, NonConvergenceError,
    NumericError, ResourceError, SpectralAmbiguityError, ValidationError)
from .lattice import CrystalParams, build_basis, build_kgrid
from .meanfield import assemble_meanfield, energy
from .scf import ScfSolver, linear_solve, retract_T, retract_theta, solve_penalized

__version__ = '0.1.0'

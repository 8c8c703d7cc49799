"""Exact diagonalization of core-level spectra: determinants, spaces, components, Krylov spectra."""
from .case import Case, CaseError, build_case, expand_case, load_case
from .fock import Determinant, FockError, LadderOp, OperatorSum
from .params import ParamError, ParamSet, load_params, save_params
from .solvers import ConvergenceError, continued_fraction, lanczos_thick_restart, resolvent_apply, tridiagonalize
from .space import ConfigConstraint, HilbertSpace, ShellLayout
from .sparse import FormatError, SparseOp, assemble, project
from .spectra import BroadeningModel, GroundManifold, RIXSConfig, SpectrumResult

__version__ = "0.1.0"

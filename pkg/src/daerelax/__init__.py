"""Structural analysis and combinatorial-relaxation repair of nonlinear DAEs."""

from .assign import DualSolution, SignatureMatrix, delta_hat, signature, solve_assignment
from .augmentation import AugmentationStep, augment_step, recover_aux_trajectory
from .errors import *  # noqa: F401,F403
from .expr import T, Expr, const, cos, exp, log, param, partial, sin, simplify, sqrt, substitute, tan, tanh, total_derivative, var
from .jacobian import SystemJacobian, classify_failure, structural_rank, system_jacobian, term_rank
from .model import DaeSystem, TrajectoryFixture, residuals, subsystem
from .numeric import Point, ZeroTestConfig, ZeroTester, evaluate, is_identically_zero, sigma_order
from .pivot import PivotChoice, find_pivot, repivot_at_point, validate_pivot
from .relax import ModificationReport, RelaxationOptions, relax, verify_equivalence
from .substitution import SubstitutionStep, lc_step, reduced_system, solve_targets, substitute_step
from .textio import load_dae, load_fixture, parse_dae, parse_fixture, serialize_dae

__version__ = "0.1.0"

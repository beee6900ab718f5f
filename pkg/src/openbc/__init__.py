"""Energy-stable open boundary conditions for skew-symmetric 1D systems."""

from .boundary import (
    BoundaryOperatorSet,
    CertReport,
    SplitOperators,
    boundary_form,
    build_split,
    certify,
    strong_bc_solve,
    strong_boundary_energy,
    viscous_block,
    weak_boundary_quadratic,
    weak_penalty,
)
from .config import RunConfig
from .linalg import DiagonalSplit, Inertia, SymMatrix, congruence_diag, eig_sym, inertia, is_psd, neumann_valid
from .models import BurgersModel, LinearSymModel, boundary_matrix, make_model
from .sbp import make_sbp, sat_term
from .solver import convergence_study, run

__version__ = "0.1.0"

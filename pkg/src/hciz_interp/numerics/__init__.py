from .dd import ExtendedReal, as_extended, exp, log, matvec
from .jet import Jet
from .linalg import (
    LUDecomposition,
    determinant,
    eig_hermitian,
    residual_norm,
    solve_linear,
    vandermonde_product,
)
from .montecarlo import RunningMoments, run_blocks
from .sampling import (
    RngStream,
    householder_complement,
    sample_haar_unitary,
    sample_simplex,
    sample_unit_sphere_complex,
)

__all__ = [
    "ExtendedReal", "as_extended", "exp", "log", "matvec", "Jet",
    "LUDecomposition", "determinant", "eig_hermitian", "residual_norm",
    "solve_linear", "vandermonde_product", "RunningMoments", "run_blocks",
    "RngStream", "householder_complement", "sample_haar_unitary",
    "sample_simplex", "sample_unit_sphere_complex",
]

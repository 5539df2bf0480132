"""Quantized tensor-train compression, inversion and application of integral operators."""

from .errors import CapacityError, DataError, FormatError, ShapeError, SingularMatrixError
from .ie_kernels import Coefficient, GridSpec, Kernel, ProblemSpec, dense_assemble, diric_rhs, operator_oracle
from .krylov import GmresConfig, SolveResult, gmres
from .tensor_core import (
    DenseTensor,
    TensorizationScheme,
    TTOperator,
    TTVector,
    load_ttb1,
    save_ttb1,
    tt_to_dense,
    tt_to_matrix,
)
from .tt_arith import tt_add, tt_identity, tt_matmat, tt_matvec_compressed, tt_matvec_dense
from .tt_compress import CompressionConfig, tt_cross, tt_round, tt_svd
from .tt_inverse import InverseConfig, column_residual, invert, invert_preconditioned, residual_estimate

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DataError",
    "FormatError",
    "ShapeError",
    "SingularMatrixError",
    "Coefficient",
    "GridSpec",
    "Kernel",
    "ProblemSpec",
    "dense_assemble",
    "diric_rhs",
    "operator_oracle",
    "GmresConfig",
    "SolveResult",
    "gmres",
    "DenseTensor",
    "TensorizationScheme",
    "TTOperator",
    "TTVector",
    "load_ttb1",
    "save_ttb1",
    "tt_to_dense",
    "tt_to_matrix",
    "tt_add",
    "tt_identity",
    "tt_matmat",
    "tt_matvec_compressed",
    "tt_matvec_dense",
    "CompressionConfig",
    "tt_cross",
    "tt_round",
    "tt_svd",
    "InverseConfig",
    "column_residual",
    "invert",
    "invert_preconditioned",
    "residual_estimate",
]

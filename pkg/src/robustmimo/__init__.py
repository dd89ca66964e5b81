"""Worst-case-robust linear MIMO transceiver design.

Given a nominal channel known up to a Frobenius-norm-bounded error, the
package computes the precoder/equalizer pair minimizing the worst-case MSE
under a transmit power budget, along with non-robust and alternating
baselines, exact worst-case certificates, and a Monte Carlo bench harness.
"""

from .conic import (
    ConeProgram,
    ConeSolution,
    ConicSolverError,
    LinearConstraint,
    LinearExpr,
    RotatedConeConstraint,
    build_robust_program,
    dump_program,
    lmi2x2_check,
    max_violation,
    solution_log,
    solve,
)
from .design import (
    AlternatingFailure,
    IterationTrace,
    ScalarDesign,
    TraceEntry,
    Transceiver,
    alternating_design,
    nonrobust_design,
    recover_scalars,
    robust_design,
)
from .linalg import SvdFactors, as_complex_matrix, frobenius_norm, hermitian_eigen, svd
from .worstcase import (
    DesignProblem,
    SecularSolveError,
    WorstCaseCertificate,
    mse,
    secular_solve,
    worst_case_error_diagonal,
    worst_case_error_general,
)

__version__ = "0.1.0"

__all__ = [
    "AlternatingFailure",
    "ConeProgram",
    "ConeSolution",
    "ConicSolverError",
    "DesignProblem",
    "IterationTrace",
    "LinearConstraint",
    "LinearExpr",
    "RotatedConeConstraint",
    "ScalarDesign",
    "SecularSolveError",
    "SvdFactors",
    "TraceEntry",
    "Transceiver",
    "WorstCaseCertificate",
    "alternating_design",
    "as_complex_matrix",
    "build_robust_program",
    "dump_program",
    "frobenius_norm",
    "hermitian_eigen",
    "lmi2x2_check",
    "max_violation",
    "mse",
    "nonrobust_design",
    "recover_scalars",
    "robust_design",
    "secular_solve",
    "solution_log",
    "solve",
    "svd",
    "worst_case_error_diagonal",
    "worst_case_error_general",
    "__version__",
]

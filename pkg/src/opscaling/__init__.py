"""Operator scaling via Sinkhorn-type iterations with overrelaxation.

The package solves the scaling problem for completely positive maps:
given matrices ``A_1, ..., A_k``, find invertible ``L`` and ``R`` so
that the scaled tuple ``L A_i R^T`` has both Gram sums equal to scaled
identities. Six iteration schemes are provided (plain fixed-point and
absorbed forms, each with Cholesky-factor and geodesic overrelaxation
variants), together with instance generators, a benchmark CLI
(``opscaling``), and a scikit-learn compatible estimator.
"""

from .cpmap import (
    ScalingPair,
    ScalingProblem,
    frame_recover,
    grad_norm,
    gram_left,
    gram_right,
    scale_stack,
)
from .errors import (
    DegenerateRowError,
    EigenConvergenceError,
    FormatError,
    NotDiagonalError,
    NotPositiveDefiniteError,
    OperatorScalingError,
    SingularTriangularError,
)
from .estimator import OperatorSinkhorn
from .instances import (
    FrameSpec,
    frame_instance,
    haar_orthogonal,
    hilbert_instance,
    load_problem,
    save_problem,
)
from .solvers import (
    Algorithm,
    FpiState,
    GeoState,
    OsiState,
    SolveReport,
    SolveStatus,
    SorConfig,
    TraceRow,
    estimate_omega,
    fpi_chol_sor_step,
    fpi_geo_sor_step,
    fpi_step,
    osi_chol_sor_step,
    osi_geo_sor_step,
    osi_step,
    solve,
)
from .spd import (
    cholesky_lower,
    geodesic_sharp,
    hilbert_matrix,
    lower_triangular_inverse,
    spd_power,
    sym_eigen,
    symmetrize,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "DegenerateRowError",
    "EigenConvergenceError",
    "FormatError",
    "FpiState",
    "FrameSpec",
    "GeoState",
    "NotDiagonalError",
    "NotPositiveDefiniteError",
    "OperatorScalingError",
    "OperatorSinkhorn",
    "OsiState",
    "ScalingPair",
    "ScalingProblem",
    "SingularTriangularError",
    "SolveReport",
    "SolveStatus",
    "SorConfig",
    "TraceRow",
    "cholesky_lower",
    "estimate_omega",
    "fpi_chol_sor_step",
    "fpi_geo_sor_step",
    "fpi_step",
    "frame_instance",
    "frame_recover",
    "geodesic_sharp",
    "grad_norm",
    "gram_left",
    "gram_right",
    "haar_orthogonal",
    "hilbert_instance",
    "hilbert_matrix",
    "load_problem",
    "lower_triangular_inverse",
    "osi_chol_sor_step",
    "osi_geo_sor_step",
    "osi_step",
    "save_problem",
    "scale_stack",
    "solve",
    "spd_power",
    "sym_eigen",
    "symmetrize",
    "__version__",
]

"""Exception types shared across the package."""


class OperatorScalingError(Exception):
    """Base class for every error raised by this package."""


class NotPositiveDefiniteError(OperatorScalingError):
    """A matrix required to be symmetric positive definite is not.

    Raised by Cholesky factorization on a nonpositive or non-finite pivot
    and by eigendecomposition-based kernels on a nonpositive eigenvalue.
    The solve driver translates this into a diverged status instead of
    propagating it, so sweeps over ill-conditioned instances keep running.
    """


class SingularTriangularError(OperatorScalingError):
    """A triangular factor has a zero or non-finite diagonal entry."""


class EigenConvergenceError(OperatorScalingError):
    """The iterative symmetric eigensolver failed to converge."""


class NotDiagonalError(OperatorScalingError):
    """A matrix expected to be numerically diagonal is not."""


class DegenerateRowError(OperatorScalingError):
    """A generated row vector is too small to normalize."""


class FormatError(OperatorScalingError):
    """A problem file or trace file does not conform to its schema."""

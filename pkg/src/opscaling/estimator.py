"""Scikit-learn style front end for the scaling solvers."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .cpmap import ScalingProblem, scale_stack
from .errors import OperatorScalingError
from .solvers import Algorithm, SolveStatus, SorConfig, solve
from .validation import as_matrix_stack


def _coerce_sor(omega):
    if isinstance(omega, SorConfig):
        return omega
    if omega is None:
        return SorConfig.off()
    if isinstance(omega, (int, float)):
        return SorConfig.fixed(float(omega))
    return SorConfig.parse(omega)


class OperatorSinkhorn(BaseEstimator, TransformerMixin):
    """Learn a doubly balancing scaling pair for a tuple of matrices.

    ``fit`` runs the selected balancing iteration on the stack
    ``X[i] = A_i`` and stores the pair ``(L_, R_)`` with
    ``sum_i (L A_i R^T)(L A_i R^T)^T = I_m / m`` and
    ``sum_i (L A_i R^T)^T (L A_i R^T) = I_n / n`` up to ``tol``;
    ``transform`` applies the learned pair to a stack of m-by-n
    matrices.

    Parameters
    ----------
    algorithm : str, default="osi-chol-sor"
        One of ``fpi``, ``osi``, ``fpi-chol-sor``, ``osi-chol-sor``,
        ``fpi-geo-sor``, ``osi-geo-sor``.
    omega : str, float or SorConfig, default="auto:5"
        Relaxation schedule: ``"off"``, ``"fixed:<w>"`` (a bare float
        means the same), or ``"auto:<p>"`` to estimate the parameter
        from the residual contraction at iteration ``p``. Ignored by the
        plain algorithms.
    max_iters : int, default=200
    tol : float, default=1e-12
        Stop once the balance residual of the scaled matrices drops to
        this value.
    raise_on_divergence : bool, default=False
        Raise instead of finishing with a diverged report.

    Attributes
    ----------
    L_ : ndarray, shape (m, m)
    R_ : ndarray, shape (n, n)
        The learned scaling pair; ``None`` when a diverged run left no
        usable pair (only possible with ``raise_on_divergence=False``).
    report_ : SolveReport
        Full per-iteration trace and termination status.
    n_iter_ : int
    grad_norm_ : float
        Balance residual at the last iteration.
    converged_ : bool

    Examples
    --------
    >>> import numpy as np
    >>> from opscaling import OperatorSinkhorn
    >>> rng = np.random.default_rng(0)
    >>> A = rng.standard_normal((4, 3, 3))
    >>> est = OperatorSinkhorn(tol=1e-10).fit(A)
    >>> bal = est.transform(A)
    >>> float(np.abs(sum(B @ B.T for B in bal) - np.eye(3) / 3).max()) < 1e-9
    True
    """

    def __init__(self, algorithm="osi-chol-sor", omega="auto:5", max_iters=200,
                 tol=1e-12, raise_on_divergence=False):
        self.algorithm = algorithm
        self.omega = omega
        self.max_iters = max_iters
        self.tol = tol
        self.raise_on_divergence = raise_on_divergence

    def fit(self, X, y=None):
        """Solve the scaling problem defined by the stack ``X``.

        Parameters
        ----------
        X : array-like of shape (k, m, n) or ScalingProblem
        y : ignored
        """
        problem = X if isinstance(X, ScalingProblem) else ScalingProblem(X)
        report = solve(
            problem,
            Algorithm(self.algorithm),
            sor=_coerce_sor(self.omega),
            max_iters=self.max_iters,
            tol=self.tol,
        )
        if report.status is SolveStatus.DIVERGED and self.raise_on_divergence:
            raise OperatorScalingError(f"solve diverged: {report.reason}")
        self.report_ = report
        self.n_iter_ = report.iterations
        self.grad_norm_ = report.final_grad_norm
        self.converged_ = report.converged
        try:
            pair = report.scaling()
        except OperatorScalingError:
            # a diverged geodesic run can end on an iterate outside the
            # SPD cone, which has no usable factorization
            if report.status is not SolveStatus.DIVERGED:
                raise
            self.L_, self.R_ = None, None
        else:
            self.L_, self.R_ = pair.L, pair.R
        return self

    def transform(self, X):
        """Apply the learned pair: returns the stack ``L_ @ X[i] @ R_.T``."""
        if getattr(self, "L_", None) is None:
            raise NotFittedError(
                "this OperatorSinkhorn instance is not fitted (or its solve "
                "diverged without a usable scaling pair)"
            )
        stack = X.matrices if isinstance(X, ScalingProblem) else as_matrix_stack(X, name="X")
        m, n = self.L_.shape[0], self.R_.shape[0]
        if stack.shape[1:] != (m, n):
            raise ValueError(f"X must stack {m}x{n} matrices, got shape {stack.shape}")
        return scale_stack(stack, self.L_, self.R_)

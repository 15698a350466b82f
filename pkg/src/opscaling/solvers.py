"""Alternating balancing iterations and their overrelaxed variants.

Six schemes in two families:

* **fixed-point family** (``fpi*``): keeps the original matrices and
  updates the scaling factors, or the SPD iterates ``(X, Y)`` for the
  geodesic variant;
* **absorbed family** (``osi*``, operator Sinkhorn): multiplies each
  incremental scaling into the matrices every iteration, so the Gram
  sums being factorized drift toward identity and stay well conditioned.
  Markedly more robust on ill-conditioned data.

Overrelaxation comes in a Cholesky flavor (linear combination of inverse
triangular factors, parameter ``omega``) and a geodesic flavor (moving
past the plain update along the SPD geodesic). With ``omega = 1`` each
variant reduces to its plain counterpart, and for any ``omega`` all six
schemes share the same fixed points: the doubly balanced tuples.

The driver :func:`solve` pins BLAS pools to one thread for the duration
of a run; at the matrix sizes in scope threaded BLAS only adds
synchronization overhead and timing noise.
"""

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from threadpoolctl import threadpool_limits

from .cpmap import (
    ScalingPair,
    grad_norm,
    gram_left,
    gram_right,
    scale_left,
    scale_right,
    scale_stack,
)
from .errors import OperatorScalingError
from .spd import cholesky_lower, geodesic_sharp, lower_triangular_inverse, spd_power, symmetrize


class Algorithm(str, Enum):
    """The six iteration schemes, keyed by their CLI names."""

    FPI = "fpi"
    OSI = "osi"
    FPI_CHOL_SOR = "fpi-chol-sor"
    OSI_CHOL_SOR = "osi-chol-sor"
    FPI_GEO_SOR = "fpi-geo-sor"
    OSI_GEO_SOR = "osi-geo-sor"

    @property
    def absorbs_scaling(self):
        """True for the absorbed (operator Sinkhorn) family."""
        return self in (Algorithm.OSI, Algorithm.OSI_CHOL_SOR, Algorithm.OSI_GEO_SOR)

    @property
    def uses_relaxation(self):
        return self not in (Algorithm.FPI, Algorithm.OSI)


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class SorConfig:
    """Relaxation schedule: off, a fixed omega, or automatic estimation.

    ``auto(p)`` runs plain iterations (omega = 1) through iteration
    ``p``, estimates omega once from the residuals at iterations ``p``
    and ``p - 2``, and keeps that value for the rest of the solve.
    """

    mode: str
    omega: float | None = None
    p: int | None = None

    def __post_init__(self):
        if self.mode == "off":
            pass
        elif self.mode == "fixed":
            if self.omega is None or not (0.0 < self.omega < 2.0):
                raise ValueError(f"fixed omega must lie in (0, 2), got {self.omega}")
        elif self.mode == "auto":
            if self.p is None or self.p < 2:
                raise ValueError(f"auto activation iteration p must be >= 2, got {self.p}")
        else:
            raise ValueError(f"unknown relaxation mode {self.mode!r}")

    @classmethod
    def off(cls):
        return cls(mode="off")

    @classmethod
    def fixed(cls, omega):
        return cls(mode="fixed", omega=float(omega))

    @classmethod
    def auto(cls, p):
        return cls(mode="auto", p=int(p))

    @classmethod
    def parse(cls, text):
        """Parse ``"off"``, ``"fixed:<w>"`` or ``"auto:<p>"``."""
        text = text.strip()
        if text == "off":
            return cls.off()
        kind, sep, arg = text.partition(":")
        if sep and kind == "fixed":
            return cls.fixed(float(arg))
        if sep and kind == "auto":
            return cls.auto(int(arg))
        raise ValueError(f"cannot parse relaxation spec {text!r} (expected off | fixed:<w> | auto:<p>)")


@dataclass(frozen=True)
class TraceRow:
    """One per-iteration record of a solve."""

    iteration: int
    grad_norm: float
    elapsed_s: float
    omega: float


@dataclass(frozen=True)
class FpiState:
    """Scaling factors (L, R) of the Cholesky fixed-point variants."""

    L: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class GeoState:
    """SPD iterates (X, Y) of the geodesic fixed-point variant."""

    X: np.ndarray
    Y: np.ndarray


@dataclass(frozen=True)
class OsiState:
    """Absorbed-family state: scaled stack plus the accumulated pair."""

    matrices: np.ndarray
    L: np.ndarray
    R: np.ndarray

    @classmethod
    def from_problem(cls, problem):
        return cls(
            matrices=problem.matrices.copy(),
            L=np.eye(problem.m),
            R=np.eye(problem.n),
        )

    def consistency_error(self, problem):
        """Largest relative gap between the absorbed stack and ``L A_i R^T``.

        Rebuilding from the accumulated pair loses accuracy on badly
        conditioned problems; this measures how far the bookkeeping has
        drifted from the stack actually iterated on.
        """
        rebuilt = scale_stack(problem.matrices, self.L, self.R)
        num = np.linalg.norm(self.matrices - rebuilt, axis=(1, 2))
        den = np.linalg.norm(self.matrices, axis=(1, 2))
        return float(np.max(num / np.maximum(den, np.finfo(float).tiny)))


@dataclass
class SolveReport:
    """Outcome of one solve: status, per-iteration trace, final state."""

    algorithm: Algorithm
    status: SolveStatus
    reason: str | None
    trace: list[TraceRow]
    final_state: object
    initial_grad_norm: float
    omega_estimate: float | None = None
    omega_clamped: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status is SolveStatus.CONVERGED

    @property
    def final_grad_norm(self):
        return self.trace[-1].grad_norm if self.trace else self.initial_grad_norm

    @property
    def iterations(self):
        return self.trace[-1].iteration if self.trace else 0

    def scaling(self):
        """The scaling pair reached by the final state.

        For the geodesic fixed-point variant the factors are the SPD
        square roots of the iterates; the other variants carry the pair
        explicitly. A diverged geodesic run may have ended outside the
        SPD cone, in which case this raises NotPositiveDefiniteError.
        """
        state = self.final_state
        if isinstance(state, GeoState):
            return ScalingPair(spd_power(state.X, 0.5), spd_power(state.Y, 0.5))
        return ScalingPair(state.L, state.R)


def fpi_step(problem, L, R):
    """One plain alternating update of the scaling pair.

    Factorizes ``sum_i A_i R^T R A_i^T = C C^T`` and sets
    ``L' = C^{-1} / sqrt(m)``, then updates ``R`` the same way from the
    adjoint Gram sum evaluated at the new ``L'``.
    """
    C = cholesky_lower(problem.phi(symmetrize(R.T @ R)))
    L1 = (1.0 / math.sqrt(problem.m)) * lower_triangular_inverse(C)
    D = cholesky_lower(problem.phi_adjoint(symmetrize(L1.T @ L1)))
    R1 = (1.0 / math.sqrt(problem.n)) * lower_triangular_inverse(D)
    return L1, R1


def fpi_chol_sor_step(problem, L, R, omega):
    """Alternating update with linear overrelaxation of the inverse factors.

    ``L' = (1 - omega) L + (omega / sqrt(m)) C^{-1}`` and likewise for
    ``R``, with the second factorization evaluated at the new ``L'``.
    Reduces to :func:`fpi_step` at ``omega = 1``.
    """
    C = cholesky_lower(problem.phi(symmetrize(R.T @ R)))
    L1 = (1.0 - omega) * L + (omega / math.sqrt(problem.m)) * lower_triangular_inverse(C)
    D = cholesky_lower(problem.phi_adjoint(symmetrize(L1.T @ L1)))
    R1 = (1.0 - omega) * R + (omega / math.sqrt(problem.n)) * lower_triangular_inverse(D)
    return L1, R1


def fpi_geo_sor_step(problem, X, Y, omega):
    """Alternating update moving along SPD geodesics past the plain target.

    ``X' = X #_omega (Phi(Y)^{-1} / m)`` followed by
    ``Y' = Y #_omega (Phi*(X')^{-1} / n)``, where ``#`` is the geodesic
    of the SPD cone. ``omega = 1`` lands exactly on the plain update.
    """
    X1 = geodesic_sharp(X, spd_power(problem.phi(Y), -1.0) / problem.m, omega)
    Y1 = geodesic_sharp(Y, spd_power(problem.phi_adjoint(X1), -1.0) / problem.n, omega)
    return X1, Y1


def osi_step(state):
    """One plain absorbed update.

    Factorizes the Gram sums of the *current* scaled stack, applies the
    incremental pair on the fly and accumulates it into ``(L, R)``.
    """
    k, m, n = state.matrices.shape
    C = cholesky_lower(gram_left(state.matrices))
    Lb = (1.0 / math.sqrt(m)) * lower_triangular_inverse(C)
    half = scale_left(state.matrices, Lb)
    D = cholesky_lower(gram_right(half))
    Rb = (1.0 / math.sqrt(n)) * lower_triangular_inverse(D)
    return OsiState(scale_right(half, Rb), Lb @ state.L, Rb @ state.R)


def osi_chol_sor_step(state, omega):
    """Absorbed update with overrelaxation against the identity.

    Because the previous scaling is already absorbed, the relaxation
    combines the fresh inverse factor with ``I``:
    ``Lb = (1 - omega) I + (omega / sqrt(m)) C^{-1}``.
    """
    k, m, n = state.matrices.shape
    C = cholesky_lower(gram_left(state.matrices))
    Lb = (1.0 - omega) * np.eye(m) + (omega / math.sqrt(m)) * lower_triangular_inverse(C)
    half = scale_left(state.matrices, Lb)
    D = cholesky_lower(gram_right(half))
    Rb = (1.0 - omega) * np.eye(n) + (omega / math.sqrt(n)) * lower_triangular_inverse(D)
    return OsiState(scale_right(half, Rb), Lb @ state.L, Rb @ state.R)


def osi_geo_sor_step(state, omega):
    """Absorbed geodesic update via symmetric fractional powers.

    The geodesic from ``I`` to ``G^{-1}`` evaluated at ``omega`` is just
    ``G^{-omega}``, whose SPD square root gives the incremental factor
    ``Lb = (m G)^{-omega/2}``; likewise for the right factor. Both
    incremental factors are symmetric here.
    """
    k, m, n = state.matrices.shape
    Lb = spd_power(m * gram_left(state.matrices), -0.5 * omega)
    half = scale_left(state.matrices, Lb)
    Rb = spd_power(n * gram_right(half), -0.5 * omega)
    return OsiState(scale_right(half, Rb), Lb @ state.L, Rb @ state.R)


def estimate_omega(err_p, err_pm2):
    """Relaxation parameter from the contraction of two residuals.

    ``beta_sq = sqrt(err_p / err_pm2)`` estimates the squared local rate
    of the plain iteration over one step; the returned value
    ``2 / (1 + sqrt(1 - beta_sq))`` is the optimal linear-SOR parameter
    for that rate. ``beta_sq`` is clamped below one so the result is
    always in ``[1, 2)``; a clamp means the residual stagnated before
    the estimate and the aggressive end is used.
    """
    if err_pm2 <= 0.0:
        raise ValueError(f"err_pm2 must be positive, got {err_pm2}")
    if err_p < 0.0:
        raise ValueError(f"err_p must be nonnegative, got {err_p}")
    beta_sq = min(math.sqrt(err_p / err_pm2), 1.0 - 1e-12)
    return 2.0 / (1.0 + math.sqrt(1.0 - beta_sq))


def _initial_state(problem, algorithm):
    if algorithm.absorbs_scaling:
        return OsiState.from_problem(problem)
    if algorithm is Algorithm.FPI_GEO_SOR:
        return GeoState(np.eye(problem.m), np.eye(problem.n))
    return FpiState(np.eye(problem.m), np.eye(problem.n))


def _advance(problem, algorithm, state, omega):
    if algorithm is Algorithm.FPI:
        return FpiState(*fpi_step(problem, state.L, state.R))
    if algorithm is Algorithm.FPI_CHOL_SOR:
        return FpiState(*fpi_chol_sor_step(problem, state.L, state.R, omega))
    if algorithm is Algorithm.FPI_GEO_SOR:
        return GeoState(*fpi_geo_sor_step(problem, state.X, state.Y, omega))
    if algorithm is Algorithm.OSI:
        return osi_step(state)
    if algorithm is Algorithm.OSI_CHOL_SOR:
        return osi_chol_sor_step(state, omega)
    return osi_geo_sor_step(state, omega)


def _scaled_grad_norm(problem, algorithm, state):
    """Balance residual of the scaled matrices for the current state.

    The absorbed family reads it off its stack; the fixed-point family
    materializes ``L A_i R^T`` (for the geodesic variant through the SPD
    square roots of the iterates).
    """
    if algorithm.absorbs_scaling:
        return grad_norm(state.matrices)
    if isinstance(state, GeoState):
        L = spd_power(state.X, 0.5)
        R = spd_power(state.Y, 0.5)
    else:
        L, R = state.L, state.R
    return grad_norm(scale_stack(problem.matrices, L, R))


def solve(problem, algorithm, sor=None, max_iters=100, tol=1e-13):
    """Drive one scheme until convergence, iteration budget, or divergence.

    Starts from identity scalings, appends a :class:`TraceRow` after
    every iteration (residual of the scaled matrices, cumulative wall
    time of the loop including the residual evaluation, omega in
    effect), and stops on ``grad_norm <= tol``, on the budget, or on
    numerical failure. Failures are reported as a ``DIVERGED`` status
    rather than raised, so benchmark sweeps always complete. A run also
    counts as diverged once the residual exceeds 1e6 times its initial
    value.

    Parameters
    ----------
    problem : ScalingProblem
    algorithm : Algorithm or str
    sor : SorConfig, optional
        Relaxation schedule; ignored by the plain schemes. Under
        ``auto(p)`` the report carries the estimated omega and whether
        the estimate was clamped.
    max_iters : int
    tol : float

    Returns
    -------
    SolveReport
    """
    algorithm = Algorithm(algorithm)
    sor = SorConfig.off() if sor is None else sor
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")

    relaxed = algorithm.uses_relaxation
    state = _initial_state(problem, algorithm)
    err0 = problem.grad_norm()
    blowup = 1e6 * max(err0, np.finfo(float).tiny)
    errors = {0: err0}
    trace = []
    status, reason = SolveStatus.MAX_ITERS, None
    omega_estimate = None
    omega_clamped = False

    with threadpool_limits(limits=1):
        start = time.perf_counter()
        for t in range(1, max_iters + 1):
            if not relaxed or sor.mode == "off":
                omega = 1.0
            elif sor.mode == "fixed":
                omega = sor.omega
            else:
                omega = omega_estimate if omega_estimate is not None else 1.0
            try:
                state = _advance(problem, algorithm, state, omega)
                err = _scaled_grad_norm(problem, algorithm, state)
            except OperatorScalingError as exc:
                status, reason = SolveStatus.DIVERGED, str(exc)
                break
            trace.append(TraceRow(t, err, time.perf_counter() - start, omega))
            errors[t] = err
            if relaxed and sor.mode == "auto" and t == sor.p and errors[sor.p - 2] > 0.0:
                omega_estimate = estimate_omega(err, errors[sor.p - 2])
                omega_clamped = math.sqrt(err / errors[sor.p - 2]) >= 1.0 - 1e-12
            if err <= tol:
                status = SolveStatus.CONVERGED
                break
            if not math.isfinite(err) or err > blowup:
                status = SolveStatus.DIVERGED
                reason = f"grad norm {err:.6e} exceeded 1e6 x initial ({err0:.6e})"
                break

    return SolveReport(
        algorithm=algorithm,
        status=status,
        reason=reason,
        trace=trace,
        final_state=state,
        initial_grad_norm=err0,
        omega_estimate=omega_estimate,
        omega_clamped=omega_clamped,
        meta=dict(problem.meta),
    )

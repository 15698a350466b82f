"""Completely positive maps defined by a tuple of rectangular matrices.

A tuple ``(A_1, ..., A_k)`` of real m-by-n matrices induces the map
``Phi(Y) = sum_i A_i Y A_i^T`` and its adjoint
``Phi*(X) = sum_i A_i^T X A_i``. The scaling problem asks for invertible
``L`` and ``R`` such that the scaled tuple ``L A_i R^T`` is doubly
balanced::

    sum_i (L A_i R^T)(L A_i R^T)^T = I_m / m
    sum_i (L A_i R^T)^T(L A_i R^T) = I_n / n

The deviation from balance is measured by :func:`grad_norm`, the root
sum of squares of the two Frobenius residuals.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotDiagonalError, NotPositiveDefiniteError
from .spd import check_symmetric, cholesky_lower, symmetrize
from .validation import as_matrix_stack, as_square


def gram_left(matrices):
    """``sum_i A_i A_i^T`` of a (k, m, n) stack, exactly symmetrized."""
    return symmetrize(np.tensordot(matrices, matrices, axes=([0, 2], [0, 2])))


def gram_right(matrices):
    """``sum_i A_i^T A_i`` of a (k, m, n) stack, exactly symmetrized."""
    return symmetrize(np.tensordot(matrices, matrices, axes=([0, 1], [0, 1])))


def scale_left(matrices, L):
    """``L @ A_i`` for every matrix in the stack, as one flat GEMM."""
    k, m, n = matrices.shape
    flat = matrices.transpose(1, 0, 2).reshape(m, k * n)
    return np.ascontiguousarray((L @ flat).reshape(L.shape[0], k, n).transpose(1, 0, 2))


def scale_right(matrices, R):
    """``A_i @ R^T`` for every matrix in the stack, as one flat GEMM."""
    k, m, n = matrices.shape
    return (matrices.reshape(k * m, n) @ R.T).reshape(k, m, R.shape[0])


def scale_stack(matrices, L, R):
    """``L @ A_i @ R^T`` for every matrix in the stack."""
    return scale_right(scale_left(matrices, L), R)


def grad_norm(matrices):
    """Balance residual of a matrix stack (or :class:`ScalingProblem`).

    ``sqrt(|sum A A^T - I_m/m|_F^2 + |sum A^T A - I_n/n|_F^2)``; zero
    exactly when the tuple is doubly balanced.
    """
    if isinstance(matrices, ScalingProblem):
        matrices = matrices.matrices
    k, m, n = matrices.shape
    left = gram_left(matrices)
    left[np.diag_indices(m)] -= 1.0 / m
    right = gram_right(matrices)
    right[np.diag_indices(n)] -= 1.0 / n
    return float(np.sqrt(np.vdot(left, left) + np.vdot(right, right)))


def _phi(matrices, Y):
    k, m, n = matrices.shape
    t = (matrices.reshape(k * m, n) @ Y).reshape(k, m, n)
    return symmetrize(np.tensordot(t, matrices, axes=([0, 2], [0, 2])))


def _phi_adjoint(matrices, X):
    t = scale_left(matrices, X)
    return symmetrize(np.tensordot(matrices, t, axes=([0, 1], [0, 1])))


class ScalingProblem:
    """A tuple of k real m-by-n matrices defining a completely positive map.

    Construction validates that ``Phi(I_n)`` and ``Phi*(I_m)`` are
    positive definite (their Cholesky factorizations succeed), so the
    solvers never iterate on data for which the balancing problem is ill
    posed. The stored stack is frozen and safe to share across threads.

    Parameters
    ----------
    matrices : array-like, shape (k, m, n)
        The defining tuple; a single 2-D array is treated as k = 1.
    meta : dict, optional
        Inert descriptive metadata (generator family, seed, parameters),
        carried through file round-trips and used by the CLI to pick
        per-family defaults.
    """

    def __init__(self, matrices, meta=None):
        stack = as_matrix_stack(matrices)
        try:
            cholesky_lower(gram_left(stack))
            cholesky_lower(gram_right(stack))
        except NotPositiveDefiniteError as exc:
            raise NotPositiveDefiniteError(
                "ill-posed problem: Phi(I) or Phi*(I) is not positive definite"
            ) from exc
        stack.flags.writeable = False
        self._matrices = stack
        self.meta = dict(meta) if meta else {}

    @property
    def matrices(self):
        """Read-only (k, m, n) stack of the defining matrices."""
        return self._matrices

    @property
    def k(self):
        return self._matrices.shape[0]

    @property
    def m(self):
        return self._matrices.shape[1]

    @property
    def n(self):
        return self._matrices.shape[2]

    def __repr__(self):
        fam = self.meta.get("family")
        tag = f", family={fam!r}" if fam else ""
        return f"ScalingProblem(k={self.k}, m={self.m}, n={self.n}{tag})"

    def phi(self, Y):
        """``sum_i A_i Y A_i^T``, validated to be SPD for SPD ``Y``."""
        Y = check_symmetric(Y, name="Y")
        if Y.shape != (self.n, self.n):
            raise ValueError(f"Y must be {self.n}x{self.n}, got {Y.shape}")
        out = _phi(self._matrices, Y)
        cholesky_lower(out)
        return out

    def phi_adjoint(self, X):
        """``sum_i A_i^T X A_i``, validated to be SPD for SPD ``X``."""
        X = check_symmetric(X, name="X")
        if X.shape != (self.m, self.m):
            raise ValueError(f"X must be {self.m}x{self.m}, got {X.shape}")
        out = _phi_adjoint(self._matrices, X)
        cholesky_lower(out)
        return out

    def scaled(self, L, R):
        """New problem with matrices ``L @ A_i @ R^T``; self is unchanged."""
        L = as_square(L, name="L")
        R = as_square(R, name="R")
        if L.shape[0] != self.m or R.shape[0] != self.n:
            raise ValueError(
                f"scaling pair must be {self.m}x{self.m} and {self.n}x{self.n}, "
                f"got {L.shape} and {R.shape}"
            )
        return ScalingProblem(scale_stack(self._matrices, L, R), meta=self.meta)

    def grad_norm(self):
        """Balance residual of the tuple; see :func:`grad_norm`."""
        return grad_norm(self._matrices)


@dataclass(frozen=True)
class ScalingPair:
    """Left/right scaling factors; ``L A_i R^T`` rebalances the tuple."""

    L: np.ndarray
    R: np.ndarray

    def smallest_singular_values(self):
        """On-demand invertibility probe: min singular value of each factor."""
        return (
            float(np.linalg.svd(self.L, compute_uv=False)[-1]),
            float(np.linalg.svd(self.R, compute_uv=False)[-1]),
        )


def frame_recover(L, R, diag_tol=1e-8):
    """Turn an operator scaling pair of a rank-one problem into a frame scaling.

    For a problem built from unit vectors ``x_i`` as ``A_i = x_i e_i^T``,
    a solution pair has diagonal ``R``, and ``P = sqrt(n) L`` together
    with ``alpha_i = sqrt((R^T R)_{ii})`` satisfies the two frame
    conditions::

        sum_i alpha_i^2 (P x_i)(P x_i)^T = I_n
        alpha_i^2 (P x_i)^T (P x_i)      = n / k    for every i

    up to a residual of the same order as the balance residual achieved
    by ``(L, R)``.

    Parameters
    ----------
    L : array-like, shape (n, n)
    R : array-like, shape (k, k)
        Scaling pair from a converged solve of the rank-one problem.
    diag_tol : float
        Largest tolerated off-diagonal magnitude of ``R``, relative to
        ``|R|_F``.

    Returns
    -------
    P : ndarray, shape (n, n)
    alpha : ndarray, shape (k,)

    Raises
    ------
    NotDiagonalError
        If ``R`` deviates from diagonal beyond ``diag_tol``, which means
        the input was not a frame-scaling solution.
    """
    L = as_square(L, name="L")
    R = as_square(R, name="R")
    off = np.abs(R - np.diag(np.diagonal(R))).max()
    scale = np.linalg.norm(R)
    if off > diag_tol * scale:
        raise NotDiagonalError(
            f"R is not numerically diagonal: max off-diagonal {off:.3e} "
            f"exceeds {diag_tol:.1e} * |R|_F = {diag_tol * scale:.3e}"
        )
    n = L.shape[0]
    alpha = np.sqrt(np.diagonal(R.T @ R))
    if np.any(alpha <= 0.0):
        raise ValueError("R has a zero diagonal entry; the scaling pair is singular")
    return np.sqrt(n) * L, alpha

"""Dense kernels on symmetric positive definite matrices.

Everything operates on plain float64 numpy arrays. Every SPD-producing
operation ends with an exact symmetrization ``(S + S^T) / 2`` so that
asymmetry cannot accumulate over thousands of solver iterations, and a
nonpositive eigenvalue or pivot is always surfaced as an error, never
clamped: leaving the SPD cone is a condition the solvers must detect.

Fractional powers go through a full symmetric eigendecomposition. The
matrices in scope are small (dimension well below a thousand), where the
O(n^3) eigensolve is negligible and symmetry of the result is exact by
construction.
"""

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import (
    EigenConvergenceError,
    NotPositiveDefiniteError,
    SingularTriangularError,
)
from .validation import SYMMETRY_ATOL


def symmetrize(s):
    """Exact symmetrization (S + S^T) / 2."""
    return 0.5 * (s + s.T)


def check_symmetric(S, name="matrix"):
    """Symmetry gate for the numeric kernels: validate and symmetrize.

    Unlike :func:`opscaling.validation.as_symmetric` this does not require
    finite entries: non-finite values produced by a diverging iteration
    must reach the factorization, whose failure the solve driver turns
    into a diverged status. (The deviation of a non-finite matrix from
    its transpose is NaN, which compares false against the tolerance.)
    """
    S = np.array(S, dtype=np.float64, order="C")
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise ValueError(f"{name} must be square, got shape {S.shape}")
    dev = np.abs(S - S.T).max()
    if dev > SYMMETRY_ATOL:
        raise ValueError(
            f"{name} is not symmetric: max |S - S^T| entry is {dev:.3e} "
            f"(tolerance {SYMMETRY_ATOL:.1e})"
        )
    return 0.5 * (S + S.T)


def cholesky_lower(S):
    """Lower-triangular Cholesky factor with positive diagonal.

    Parameters
    ----------
    S : array-like, shape (d, d)
        Symmetric positive definite matrix.

    Returns
    -------
    L : ndarray, shape (d, d)
        The unique lower-triangular factor with ``L @ L.T == S`` and
        strictly positive diagonal.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is nonpositive or the input has non-finite entries;
        under aggressive overrelaxation this is the signal that an
        iterate left the SPD cone.
    """
    S = check_symmetric(S, name="S")
    if not np.all(np.isfinite(S)):
        raise NotPositiveDefiniteError("matrix has non-finite entries")
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from exc


def lower_triangular_inverse(L):
    """Invert a lower-triangular matrix.

    Raises
    ------
    SingularTriangularError
        On a zero or non-finite diagonal entry.
    ValueError
        If entries above the diagonal are not exactly zero.
    """
    L = np.array(L, dtype=np.float64, order="C")
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 1:
        raise ValueError(f"L must be square, got shape {L.shape}")
    if np.any(np.triu(L, k=1) != 0.0):
        raise ValueError("L has nonzero entries above the diagonal")
    diag = np.diagonal(L)
    if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
        raise SingularTriangularError("triangular factor has a zero or non-finite diagonal entry")
    trtri = get_lapack_funcs("trtri", (L,))
    inv, info = trtri(L, lower=1)
    if info != 0:
        raise SingularTriangularError(f"triangular inversion failed (LAPACK info={info})")
    return inv


def sym_eigen(S):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(lam, V)`` with ``S == V @ diag(lam) @ V.T`` and ``V``
    orthogonal.

    Raises
    ------
    EigenConvergenceError
        If the underlying iterative eigensolver does not converge within
        its internal iteration budget (non-finite input fails the same way).
    """
    S = check_symmetric(S, name="S")
    try:
        lam, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"symmetric eigensolver did not converge: {exc}") from exc
    return lam[::-1].copy(), np.ascontiguousarray(V[:, ::-1])


def spd_power(S, w):
    """Real matrix power ``S**w`` of an SPD matrix.

    Computed as ``V @ diag(lam**w) @ V.T`` from the eigendecomposition
    and symmetrized exactly. Any nonpositive eigenvalue is an error (no
    clamping), as is an overflow of ``lam**w``.
    """
    lam, V = sym_eigen(S)
    smallest = lam[-1]
    if smallest <= 0.0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: smallest eigenvalue {smallest:.6e}"
        )
    with np.errstate(over="ignore"):
        powed = lam**w
    if not np.all(np.isfinite(powed)):
        raise NotPositiveDefiniteError(
            f"matrix power overflowed: eigenvalue {smallest:.6e} raised to {w}"
        )
    return symmetrize((V * powed) @ V.T)


def geodesic_sharp(X, Xt, w):
    """Point at parameter ``w`` on the SPD geodesic from ``X`` to ``Xt``.

    Evaluates ``X^{1/2} (X^{-1/2} Xt X^{-1/2})^w X^{1/2}``, the geodesic
    of the Hilbert/affine-invariant geometry on the SPD cone. For
    ``w in [0, 1]`` this traces the segment between the endpoints; the
    formula stays well defined for every real ``w``, which is what the
    overrelaxed solvers exploit.
    """
    Xt = check_symmetric(Xt, name="Xt")
    lam, V = sym_eigen(X)
    if lam[-1] <= 0.0:
        raise NotPositiveDefiniteError(
            f"geodesic endpoint is not positive definite: eigenvalue {lam[-1]:.6e}"
        )
    if Xt.shape != (lam.size, lam.size):
        raise ValueError(f"endpoint dimensions differ: {(lam.size, lam.size)} vs {Xt.shape}")
    root = np.sqrt(lam)
    half = (V * root) @ V.T
    inv_half = (V / root) @ V.T
    inner = spd_power(symmetrize(inv_half @ Xt @ inv_half), w)
    return symmetrize(half @ inner @ half)


def hilbert_matrix(n):
    """The n-by-n Hilbert matrix, ``H[i, j] = 1 / (i + j + 1)`` (0-based).

    A canonical severely ill-conditioned SPD matrix, used by the instance
    generators to stress numerical stability.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    idx = np.arange(n, dtype=np.float64)
    return 1.0 / (idx[:, None] + idx[None, :] + 1.0)

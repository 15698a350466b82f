"""Input validation helpers used by the public entry points.

All helpers return fresh float64 C-contiguous arrays, so callers may
mutate the result without aliasing the caller's data.
"""

import numpy as np

# Absolute per-entry tolerance for accepting a matrix as symmetric.
SYMMETRY_ATOL = 1e-12


def as_matrix(a, name="matrix"):
    """Coerce to a 2-D float64 array with finite entries."""
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if min(arr.shape) < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_square(a, name="matrix"):
    arr = as_matrix(a, name=name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def as_symmetric(a, atol=SYMMETRY_ATOL, name="matrix"):
    """Validate symmetry to ``atol`` per entry, then symmetrize exactly."""
    arr = as_square(a, name=name)
    dev = np.abs(arr - arr.T).max()
    if dev > atol:
        raise ValueError(
            f"{name} is not symmetric: max |S - S^T| entry is {dev:.3e} (tolerance {atol:.1e})"
        )
    return 0.5 * (arr + arr.T)


def as_matrix_stack(mats, name="matrices"):
    """Coerce a sequence of equally sized 2-D arrays to a (k, m, n) stack."""
    arr = np.array(mats, dtype=np.float64, order="C")
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError(f"{name} must stack to 3-D (k, m, n), got ndim={arr.ndim}")
    if min(arr.shape) < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contain non-finite entries")
    return arr

"""Seeded instance generators and the JSON problem-file format.

Reproducibility contract
------------------------
All randomness comes from the Philox counter-based generator keyed by
the pair ``(seed, stream)``, so a given seed yields independent,
order-insensitive streams:

* Hilbert family: the orthogonal factor of matrix ``i`` draws from
  stream ``i``;
* frame family: the k-by-k factor draws from stream 0, the n-by-n
  factor from stream 1.

Normal variates are the inverse normal CDF of 53-bit uniforms rather
than a rejection sampler, so the draw sequence is fixed by the bit
stream alone. A fixed ``(spec, seed)`` therefore reproduces the same
instance bit-for-bit wherever the BLAS rounding of the final QR agrees.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .cpmap import ScalingProblem
from .errors import DegenerateRowError, FormatError, OperatorScalingError
from .spd import hilbert_matrix

_SEED_MAX = 2**64


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < _SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def _stream(seed, index):
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _standard_normal(gen, shape):
    raw = gen.integers(0, _SEED_MAX, size=shape, dtype=np.uint64, endpoint=False)
    # top 53 bits, centered half a step into (0, 1): ndtri never sees 0 or 1
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _haar(dim, gen):
    z = _standard_normal(gen, (dim, dim))
    q, r = np.linalg.qr(z)
    # sign-correct with the R diagonal; without it QR is not Haar
    return q * np.where(np.diagonal(r) < 0.0, -1.0, 1.0)


def haar_orthogonal(dim, seed):
    """Orthogonal matrix drawn from the Haar distribution.

    QR of a standard-normal matrix with the R-diagonal sign correction.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return _haar(dim, _stream(_check_seed(seed), 0))


def hilbert_instance(n, k, seed):
    """Problem with matrices ``Q_i H``: random rotations of the Hilbert matrix.

    Every matrix shares the singular values of ``H`` and is therefore as
    ill conditioned as the Hilbert matrix itself, which is what makes
    this family a stress test for the fixed-point solvers.
    """
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    seed = _check_seed(seed)
    H = hilbert_matrix(n)
    stack = np.stack([_haar(n, _stream(seed, i)) @ H for i in range(k)])
    meta = {"family": "hilbert", "seed": str(seed), "spec": {"n": n, "k": k}}
    return ScalingProblem(stack, meta=meta)


@dataclass(frozen=True)
class FrameSpec:
    """Parameters of the rank-one (frame scaling) family.

    ``kappa`` controls the conditioning of the vector system; with
    ``extreme`` the first matrix is replaced by the rank-one matrix of
    the first standard basis vector, which destroys positivity
    improvement and slows the plain iterations dramatically.
    """

    n: int
    k: int
    kappa: float
    extreme: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.k < self.n:
            raise ValueError(f"k must be >= n, got k={self.k}, n={self.n}")
        if not self.kappa > 1.0:
            raise ValueError(f"kappa must be > 1, got {self.kappa}")


def frame_instance(spec, seed):
    """Rank-one problem ``A_i = x_i e_i^T`` from a conditioned vector system.

    The vectors are the unit-normalized rows of ``B = Q' D P^T`` with
    Haar factors ``Q`` (k-by-k, first n columns kept) and ``P`` (n-by-n)
    and ``D`` diagonal with entries evenly spaced in ``[1/kappa, 1]``
    (linear spacing, endpoints included).

    Returns
    -------
    problem : ScalingProblem
        Stack of k matrices of shape (n, k).
    vectors : ndarray, shape (k, n)
        The unit vectors, row per matrix (the first row is ``e_1`` in
        the extreme variant).
    """
    seed = _check_seed(seed)
    n, k = spec.n, spec.k
    Q = _haar(k, _stream(seed, 0))
    P = _haar(n, _stream(seed, 1))
    diag = np.linspace(1.0 / spec.kappa, 1.0, n)
    B = (Q[:, :n] * diag) @ P.T
    norms = np.linalg.norm(B, axis=1)
    if np.any(norms < 1e-300):
        raise DegenerateRowError(f"row {int(np.argmin(norms))} of B has norm below 1e-300")
    vectors = B / norms[:, None]
    if spec.extreme:
        vectors = vectors.copy()
        vectors[0] = 0.0
        vectors[0, 0] = 1.0
    stack = np.zeros((k, n, k))
    for i in range(k):
        stack[i, :, i] = vectors[i]
    meta = {
        "family": "frame-extreme" if spec.extreme else "frame",
        "seed": str(seed),
        "spec": {"n": n, "k": k, "kappa": spec.kappa, "extreme": spec.extreme},
    }
    return ScalingProblem(stack, meta=meta), vectors


def save_problem(problem, path):
    """Write a problem to ``path`` as a single JSON document.

    Floats are serialized with their shortest round-trip decimal
    representation, so :func:`load_problem` reproduces the stack
    bit-for-bit.
    """
    k, m, n = problem.matrices.shape
    meta = {
        "family": problem.meta.get("family", "custom"),
        "seed": str(problem.meta.get("seed", "")),
        "spec": problem.meta.get("spec", {}),
    }
    doc = {
        "m": m,
        "n": n,
        "k": k,
        "matrices": [mat.ravel().tolist() for mat in problem.matrices],
        "meta": meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_problem(path):
    """Read a problem file written by :func:`save_problem`.

    Raises
    ------
    FormatError
        On schema violations, non-finite or missing values, or when the
        stored matrices fail the problem invariants (e.g. a degenerate
        map); the message names the offending field.
    OSError
        If the file cannot be read.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top-level value must be an object")
    dims = {}
    for field in ("m", "n", "k"):
        value = doc.get(field)
        if not isinstance(value, int) or value < 1:
            raise FormatError(f"{path}: field {field!r} must be a positive integer, got {value!r}")
        dims[field] = value
    mats = doc.get("matrices")
    if not isinstance(mats, list) or len(mats) != dims["k"]:
        raise FormatError(f"{path}: field 'matrices' must be a list of k={dims['k']} arrays")
    expect = dims["m"] * dims["n"]
    stack = np.empty((dims["k"], dims["m"], dims["n"]))
    for i, flat in enumerate(mats):
        if not isinstance(flat, list) or len(flat) != expect:
            raise FormatError(
                f"{path}: matrices[{i}] must hold {expect} row-major numbers, "
                f"got {len(flat) if isinstance(flat, list) else type(flat).__name__}"
            )
        try:
            row = np.asarray(flat, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}: matrices[{i}] holds a non-numeric value") from exc
        if not np.all(np.isfinite(row)):
            raise FormatError(f"{path}: matrices[{i}] holds a non-finite value")
        stack[i] = row.reshape(dims["m"], dims["n"])
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict):
        raise FormatError(f"{path}: field 'meta' must be an object")
    try:
        return ScalingProblem(stack, meta=meta)
    except (OperatorScalingError, ValueError) as exc:
        raise FormatError(f"{path}: degenerate problem: {exc}") from exc

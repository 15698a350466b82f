import numpy as np
import pytest

from opscaling import ScalingProblem, hilbert_instance
from opscaling.instances import _haar, _stream


def conditioned_stack(seed, dim=5, k=3, cond=10.0):
    """k random dim-by-dim matrices with singular values in [1/cond, 1]."""
    svals = np.linspace(1.0 / cond, 1.0, dim)
    mats = []
    for i in range(k):
        u = _haar(dim, _stream(seed, 2 * i))
        v = _haar(dim, _stream(seed, 2 * i + 1))
        mats.append((u * svals) @ v.T)
    return np.stack(mats)


def balanced_stack(seed, dim=4, k=3):
    """Exactly balanced tuple: orthogonal matrices scaled by 1/sqrt(dim*k)."""
    scale = 1.0 / np.sqrt(dim * k)
    return np.stack([scale * _haar(dim, _stream(seed, i)) for i in range(k)])


def random_spd(rng, dim, cond=100.0):
    """SPD matrix with eigenvalues evenly spread over [1/cond, 1]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lam = np.linspace(1.0 / cond, 1.0, dim)
    s = (q * lam) @ q.T
    return 0.5 * (s + s.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20250811)


@pytest.fixture(scope="session")
def hilbert_problem():
    """The ill-conditioned rotated-Hilbert instance used across suites."""
    return hilbert_instance(5, 7, 1)


@pytest.fixture(scope="session")
def suite_problem():
    """Well-conditioned 5x5, k=3 instance (cond(A_i) = 10)."""
    return ScalingProblem(conditioned_stack(7))


@pytest.fixture(scope="session")
def balanced_problem():
    return ScalingProblem(balanced_stack(5))

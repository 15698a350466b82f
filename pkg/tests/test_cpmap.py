import numpy as np
import pytest
from numpy.testing import assert_allclose

from opscaling import (
    NotDiagonalError,
    NotPositiveDefiniteError,
    OsiState,
    ScalingPair,
    ScalingProblem,
    SorConfig,
    frame_recover,
    grad_norm,
    haar_orthogonal,
    solve,
)
from conftest import balanced_stack, random_spd


def rank_one_problem(vectors):
    """A_i = x_i e_i^T for rows x_i of `vectors` (k, n)."""
    k, n = vectors.shape
    stack = np.zeros((k, n, k))
    for i in range(k):
        stack[i, :, i] = vectors[i]
    return ScalingProblem(stack)


class TestPhi:
    def test_identity_map(self, rng):
        Y = random_spd(rng, 4)
        p = ScalingProblem(np.eye(4)[None])
        assert_allclose(p.phi(Y), Y, atol=1e-15)
        assert_allclose(p.phi_adjoint(Y), Y, atol=1e-15)

    def test_at_identity(self, rng):
        stack = rng.standard_normal((3, 4, 5))
        p = ScalingProblem(stack)
        assert_allclose(p.phi(np.eye(5)), sum(A @ A.T for A in stack), atol=1e-13)
        assert_allclose(p.phi_adjoint(np.eye(4)), sum(A.T @ A for A in stack), atol=1e-13)

    def test_hand_expansion(self):
        p = ScalingProblem([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])])
        assert_allclose(p.phi(np.diag([2.0, 3.0])), [[5.0]], atol=0)

    def test_adjoint_trace_identity(self, rng):
        stack = rng.standard_normal((4, 3, 6))
        p = ScalingProblem(stack)
        for _ in range(20):
            X = random_spd(rng, 3)
            Y = random_spd(rng, 6)
            lhs = float(np.vdot(p.phi(Y), X))
            rhs = float(np.vdot(Y, p.phi_adjoint(X)))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_output_is_exactly_symmetric(self, rng):
        p = ScalingProblem(rng.standard_normal((5, 4, 4)))
        out = p.phi(random_spd(rng, 4))
        assert np.array_equal(out, out.T)

    def test_degenerate_output_raises(self):
        # rank-deficient map: Phi(I) is singular
        with pytest.raises(NotPositiveDefiniteError):
            ScalingProblem(np.array([[[1.0, 0.0], [0.0, 0.0]]]))


class TestApplyScaling:
    def test_identity(self, rng):
        p = ScalingProblem(rng.standard_normal((3, 4, 4)))
        q = p.scaled(np.eye(4), np.eye(4))
        assert_allclose(q.matrices, p.matrices, atol=0)

    def test_scalar_left(self, rng):
        p = ScalingProblem(rng.standard_normal((3, 4, 4)))
        q = p.scaled(2.0 * np.eye(4), np.eye(4))
        assert_allclose(q.matrices, 2.0 * p.matrices, atol=0)

    def test_singular_values_match_direct_product(self, rng):
        p = ScalingProblem(rng.standard_normal((3, 4, 5)))
        L = rng.standard_normal((4, 4)) + 3.0 * np.eye(4)
        R = rng.standard_normal((5, 5)) + 3.0 * np.eye(5)
        q = p.scaled(L, R)
        for A, B in zip(p.matrices, q.matrices):
            sv_direct = np.linalg.svd(L @ A @ R.T, compute_uv=False)
            sv_scaled = np.linalg.svd(B, compute_uv=False)
            assert_allclose(sv_scaled, sv_direct, atol=1e-11)

    def test_composition(self, rng):
        p = ScalingProblem(rng.standard_normal((2, 3, 4)))
        L1 = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
        R1 = rng.standard_normal((4, 4)) + 3.0 * np.eye(4)
        L2 = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
        R2 = rng.standard_normal((4, 4)) + 3.0 * np.eye(4)
        q1 = p.scaled(L1, R1).scaled(L2, R2)
        q2 = p.scaled(L2 @ L1, R2 @ R1)
        assert np.linalg.norm(q1.matrices - q2.matrices) <= 1e-12 * np.linalg.norm(q2.matrices)

    def test_input_unmodified(self, rng):
        p = ScalingProblem(rng.standard_normal((2, 3, 3)))
        before = p.matrices.copy()
        p.scaled(2.0 * np.eye(3), np.eye(3))
        assert np.array_equal(p.matrices, before)


class TestGradNorm:
    def test_balanced_is_zero(self, balanced_problem):
        assert balanced_problem.grad_norm() <= 1e-14

    def test_scalar_formula(self):
        for a in (0.5, 1.0, 2.0, 3.7):
            p = ScalingProblem(np.array([[[a]]]))
            assert abs(p.grad_norm() - np.sqrt(2.0) * abs(a * a - 1.0)) <= 1e-14

    def test_scaled_identity_is_balanced(self):
        n = 6
        p = ScalingProblem((np.eye(n) / np.sqrt(n))[None])
        assert p.grad_norm() <= 1e-15

    def test_orthogonal_invariance(self, rng):
        stack = rng.standard_normal((4, 3, 5))
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        qp, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        rotated = np.matmul(np.matmul(q, stack), qp)
        assert abs(grad_norm(stack) - grad_norm(rotated)) <= 1e-12

    def test_accepts_problem_and_stack(self, rng):
        stack = rng.standard_normal((2, 3, 3))
        assert grad_norm(stack) == grad_norm(ScalingProblem(stack))


class TestScalingProblem:
    def test_dimensions(self, rng):
        p = ScalingProblem(rng.standard_normal((4, 2, 7)))
        assert (p.k, p.m, p.n) == (4, 2, 7)

    def test_matrices_read_only(self, rng):
        p = ScalingProblem(rng.standard_normal((2, 3, 3)))
        with pytest.raises(ValueError):
            p.matrices[0, 0, 0] = 1.0

    def test_single_matrix_promoted(self):
        p = ScalingProblem(np.eye(3))
        assert (p.k, p.m, p.n) == (1, 3, 3)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ScalingProblem(np.full((1, 2, 2), np.nan))

    def test_rejects_all_zero(self):
        with pytest.raises(NotPositiveDefiniteError):
            ScalingProblem(np.zeros((2, 3, 3)))


class TestScalingPair:
    def test_smallest_singular_values(self):
        pair = ScalingPair(np.diag([2.0, 1.0]), np.diag([3.0, 0.5]))
        assert pair.smallest_singular_values() == (1.0, 0.5)


class TestFrameRecover:
    def _solve_pair(self, problem):
        report = solve(problem, "osi-chol-sor", sor=SorConfig.auto(2), max_iters=300, tol=1e-13)
        assert report.converged
        pair = report.scaling()
        return pair.L, pair.R, report.final_grad_norm

    @staticmethod
    def frame_residuals(P, alpha, vectors):
        """Residuals of the two frame conditions, relative to their targets."""
        k, n = vectors.shape
        Px = vectors @ P.T
        cond1 = (alpha**2)[:, None, None] * np.einsum("ki,kj->kij", Px, Px)
        r1 = np.linalg.norm(cond1.sum(axis=0) - np.eye(n)) / np.sqrt(n)
        norms = alpha**2 * np.einsum("ki,ki->k", Px, Px)
        r2 = np.linalg.norm(norms - n / k) / (n / np.sqrt(k))
        return float(r1), float(r2)

    def test_scalar_case(self):
        problem = rank_one_problem(np.array([[1.0]]))
        L, R, g = self._solve_pair(problem)
        P, alpha = frame_recover(L, R)
        assert_allclose(P, [[1.0]], atol=1e-12)
        assert_allclose(alpha, [1.0], atol=1e-12)

    def test_standard_basis_vectors(self):
        n = 5
        problem = rank_one_problem(np.eye(n))
        L, R, g = self._solve_pair(problem)
        P, alpha = frame_recover(L, R)
        assert_allclose(P, np.eye(n), atol=1e-9)
        assert_allclose(alpha, np.ones(n), atol=1e-9)

    def test_orthonormal_vectors_satisfy_conditions(self):
        n = 6
        vectors = haar_orthogonal(n, 99)
        problem = rank_one_problem(vectors)
        L, R, g = self._solve_pair(problem)
        P, alpha = frame_recover(L, R)
        r1, r2 = self.frame_residuals(P, alpha, vectors)
        scaled_g = problem.scaled(L, R).grad_norm()
        assert np.hypot(r1, r2) <= 10.0 * max(g, scaled_g)

    def test_rejects_non_diagonal_r(self):
        R = np.array([[1.0, 0.3], [0.0, 1.0]])
        with pytest.raises(NotDiagonalError):
            frame_recover(np.eye(2), R)

    def test_accepts_tiny_off_diagonal(self):
        R = np.eye(3)
        R[0, 1] = 1e-12
        P, alpha = frame_recover(np.eye(3), R)
        assert_allclose(alpha, np.ones(3), atol=1e-9)


class TestOsiStateConsistency:
    def test_accumulated_pair_reproduces_stack(self, hilbert_problem):
        report = solve(hilbert_problem, "osi", max_iters=30, tol=1e-30)
        state = report.final_state
        assert isinstance(state, OsiState)
        assert state.consistency_error(hilbert_problem) <= 1e-8


def test_balanced_stack_helper_is_balanced():
    assert grad_norm(balanced_stack(12)) <= 1e-14

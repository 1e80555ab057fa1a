import numpy as np
import pytest
import scipy.sparse as sp

from magmapc import fem
from magmapc.mesh import build_unit_square
from magmapc.solvers import (BlockDiagPreconditioner, BlockOperator,
                             MinresBreakdownError,
                             NotSymmetricPositiveDefiniteError, SparseCholesky,
                             exact_preconditioner, identity_preconditioner,
                             minres, project_constant_pressure)
from conftest import make_verification_system, rng


class TestSparseCholesky:
    def test_2x2_solve(self):
        # [[4,1],[1,3]] x = (1,2)  ->  x = (1/11, 7/11)
        M = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
        f = SparseCholesky(M)
        x = f.solve(np.array([1.0, 2.0]))
        assert np.allclose(x, [1.0 / 11.0, 7.0 / 11.0])

    def test_roundtrip_random_spd(self):
        r = rng(7)
        n = 40
        R = r.standard_normal((n, n))
        M = sp.csr_matrix(R @ R.T + n * np.eye(n))
        f = SparseCholesky(M)
        b = r.standard_normal(n)
        assert np.linalg.norm(M @ f.solve(b) - b) < 1e-9 * np.linalg.norm(b)

    def test_rejects_nonsymmetric(self):
        M = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
        with pytest.raises(NotSymmetricPositiveDefiniteError):
            SparseCholesky(M)

    def test_rejects_indefinite(self):
        M = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
        with pytest.raises(NotSymmetricPositiveDefiniteError):
            SparseCholesky(M)

    def test_rejects_singular(self):
        M = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises((NotSymmetricPositiveDefiniteError, RuntimeError)):
            SparseCholesky(M)


class TestBlockOperator:
    def test_matvec_matches_dense(self):
        r = rng(2)
        A = sp.csr_matrix(np.diag(r.uniform(1, 2, 5)))
        B = sp.csr_matrix(r.standard_normal((3, 5)))
        C = sp.csr_matrix(np.diag(r.uniform(0, 1, 3)))
        op = BlockOperator(A, B, C)
        x = r.standard_normal(8)
        assert np.allclose(op.matvec(x), op.dense() @ x)

    def test_dense_symmetric(self):
        r = rng(3)
        A = sp.csr_matrix(np.diag(r.uniform(1, 2, 4)))
        B = sp.csr_matrix(r.standard_normal((2, 4)))
        C = sp.csr_matrix(np.eye(2))
        K = BlockOperator(A, B, C).dense()
        assert np.allclose(K, K.T)


class TestProjection:
    def test_hand_computed_hat_function(self):
        """On the n=2 unit square, the center-vertex hat carries Q-mean 1/4;
        projecting the corresponding coordinate vector subtracts 1/4."""
        mesh = build_unit_square(2)
        _, pmap = fem.taylor_hood(mesh)
        Q = fem.assemble_Q(mesh, pmap)
        center = np.flatnonzero(
            np.all(np.abs(mesh.vertices - 0.5) < 1e-12, axis=1))[0]
        p = np.zeros(pmap.n_dofs)
        p[center] = 1.0
        proj = project_constant_pressure(p, Q)
        expected = np.full(pmap.n_dofs, -0.25)
        expected[center] = 0.75
        assert np.allclose(proj, expected)

    def test_idempotent_and_kills_constants(self):
        mesh = build_unit_square(3)
        _, pmap = fem.taylor_hood(mesh)
        Q = fem.assemble_Q(mesh, pmap)
        p = rng(1).standard_normal(pmap.n_dofs)
        proj = project_constant_pressure(p, Q)
        assert np.allclose(proj, project_constant_pressure(proj, Q))
        one = np.ones(pmap.n_dofs)
        assert abs(one @ (Q @ proj)) < 1e-12
        assert np.linalg.norm(project_constant_pressure(one, Q)) < 1e-13


class TestMinres:
    def small_op(self, seed=0, n_u=6, n_p=3):
        r = rng(seed)
        R = r.standard_normal((n_u, n_u))
        A = sp.csr_matrix(R @ R.T + n_u * np.eye(n_u))
        B = sp.csr_matrix(r.standard_normal((n_p, n_u)))
        C = sp.csr_matrix(np.diag(r.uniform(0.1, 1.0, n_p)))
        return BlockOperator(A, B, C)

    def test_solves_small_system(self):
        op = self.small_op()
        b = rng(5).standard_normal(op.n)
        rep = minres(op, identity_preconditioner(), b, tol=1e-10)
        assert rep.converged
        assert np.linalg.norm(op.matvec(np.concatenate([rep.u, rep.p])) - b) \
            < 1e-9 * np.linalg.norm(b)

    def test_exact_preconditioner_few_iterations(self):
        """With P = A and T = Q + C the spectrum collapses onto a handful of
        clusters; a tiny system converges in ~3 iterations."""
        op = self.small_op(seed=9)
        T = (op.C + sp.eye(op.n_p)).tocsr()
        pc = exact_preconditioner(op.A, T)
        b = rng(6).standard_normal(op.n)
        rep = minres(op, pc, b, tol=1e-10)
        assert rep.converged
        assert rep.iterations <= op.n

    def test_zero_rhs(self):
        op = self.small_op()
        rep = minres(op, identity_preconditioner(), np.zeros(op.n))
        assert rep.converged and rep.iterations == 0
        assert np.linalg.norm(rep.u) == 0.0

    def test_residual_history_shape(self):
        op = self.small_op(seed=4)
        rep = minres(op, identity_preconditioner(),
                     rng(0).standard_normal(op.n), tol=1e-10)
        assert rep.residuals[0] == 1.0
        assert len(rep.residuals) == rep.iterations + 1
        assert rep.residuals[-1] <= 1e-10

    def test_preconditioned_residual_monotone(self):
        """The minimised preconditioned residual norm never increases."""
        mesh, vmap, pmap, system = make_verification_system(
            4, 1.0, lambda x, z: np.ones_like(x))
        op = BlockOperator(system.A, system.B, system.C)
        pc = exact_preconditioner(system.A, (system.Q + system.C).tocsr())
        b = rng(11).standard_normal(op.n)
        rep = minres(op, pc, b, tol=1e-12, project_nullspace=True, Q=system.Q)
        pr = np.array(rep.precond_residuals)
        assert np.all(np.diff(pr) <= 1e-12 * pr[0])

    def test_max_iters_reported_as_nonconverged(self):
        op = self.small_op(seed=8)
        rep = minres(op, identity_preconditioner(),
                     rng(3).standard_normal(op.n), tol=1e-14, max_iters=2)
        assert not rep.converged
        assert rep.iterations == 2

    def test_nullspace_projection_consistency(self):
        """A singular saddle-point system (full Dirichlet velocity) is solved
        with a pressure fixed to Q-mean zero."""
        mesh, vmap, pmap, system = make_verification_system(
            4, 0.0, lambda x, z: np.zeros_like(x))
        op = BlockOperator(system.A, system.B, system.C)
        pc = exact_preconditioner(system.A, (system.Q + system.C).tocsr())
        b = rng(13).standard_normal(op.n)
        # make the rhs consistent: remove the constant-pressure component
        rep = minres(op, pc, b, tol=1e-10, project_nullspace=True, Q=system.Q)
        assert rep.converged
        one = np.ones(system.n_p)
        assert abs(one @ (system.Q @ rep.p)) < 1e-8

    def test_indefinite_preconditioner_raises(self):
        op = self.small_op(seed=1)
        bad = BlockDiagPreconditioner(lambda x: -x, lambda x: -x, label="BAD")
        with pytest.raises(MinresBreakdownError):
            minres(op, bad, rng(2).standard_normal(op.n))

    def test_write_residual_csv(self, tmp_path):
        op = self.small_op(seed=2)
        rep = minres(op, identity_preconditioner(),
                     rng(1).standard_normal(op.n), tol=1e-8)
        path = tmp_path / "res.csv"
        rep.write_residual_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iteration,relative_true_residual"
        assert len(lines) == len(rep.residuals) + 1
        assert float(lines[1].split(",")[1]) == 1.0

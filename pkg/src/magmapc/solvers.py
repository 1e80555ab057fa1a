"""Sparse factorizations, block operators and preconditioned MINRES.

The MINRES driver recomputes the true residual ||b - Kx|| / ||b|| every
iteration and terminates on that quantity, so iteration counts are directly
comparable across preconditioners.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class NotSymmetricPositiveDefiniteError(ValueError):
    pass


class SparseCholesky:
    """SPD sparse factorization with a fill-reducing ordering.

    Backed by SuperLU in symmetric mode with diagonal pivoting; a non-positive
    pivot flags a matrix that is not positive definite.
    """

    def __init__(self, M: sp.csr_matrix):
        M = sp.csr_matrix(M)
        asym = abs(M - M.T).max()
        scale = max(abs(M).max(), 1.0)
        if asym > 1e-12 * scale:
            raise NotSymmetricPositiveDefiniteError("matrix is not symmetric")
        self.shape = M.shape
        self._lu = spla.splu(
            M.tocsc(),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
        d = self._lu.U.diagonal()
        if np.any(d <= 0):
            raise NotSymmetricPositiveDefiniteError(
                "non-positive pivot: matrix is not positive definite")

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))


class BlockOperator:
    """Action of the symmetric saddle-point matrix [A B^T; B -C]."""

    def __init__(self, A, B, C):
        self.A = A
        self.B = B
        self.C = C
        self.n_u = A.shape[0]
        self.n_p = C.shape[0]
        self.n = self.n_u + self.n_p

    def matvec(self, x):
        u = x[:self.n_u]
        p = x[self.n_u:]
        return np.concatenate([self.A @ u + self.B.T @ p,
                               self.B @ u - self.C @ p])

    def dense(self):
        K = sp.bmat([[self.A, self.B.T], [self.B, -self.C]]).toarray()
        return K


@dataclass
class BlockDiagPreconditioner:
    """Block-diagonal preconditioner action: P^{-1} on velocity, T^{-1} on pressure."""

    apply_P: callable
    apply_T: callable
    label: str = "LU"

    def apply(self, x, n_u):
        return np.concatenate([self.apply_P(x[:n_u]), self.apply_T(x[n_u:])])


def exact_preconditioner(A, T):
    """The 'LU' preconditioner: direct solves with P = A and T = Q + C_k."""
    fP = SparseCholesky(A)
    fT = SparseCholesky(T)
    return BlockDiagPreconditioner(fP.solve, fT.solve, label="LU")


def identity_preconditioner():
    return BlockDiagPreconditioner(lambda x: x.copy(), lambda x: x.copy(),
                                   label="NONE")


def project_constant_pressure(p, Q):
    """Q-orthogonal projection removing the constant pressure mode."""
    one = np.ones(Q.shape[0])
    q1 = Q @ one
    return p - (q1 @ p) / (q1 @ one) * one


@dataclass
class SolverReport:
    iterations: int
    converged: bool
    residuals: list = field(default_factory=list)
    wall_time: float = 0.0
    u: np.ndarray | None = None
    p: np.ndarray | None = None
    precond_residuals: list = field(default_factory=list)

    def write_residual_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iteration,relative_true_residual\n")
            for i, r in enumerate(self.residuals):
                fh.write(f"{i},{r:.16e}\n")


class MinresBreakdownError(RuntimeError):
    pass


def minres(op: BlockOperator, pc: BlockDiagPreconditioner, rhs, tol=1e-8,
           max_iters=5000, project_nullspace=False, Q=None):
    """Preconditioned MINRES with zero initial guess.

    When project_nullspace is set, the right-hand side is projected onto the
    range of the operator (the constant-pressure direction is removed) and
    every solution iterate's pressure block is kept Q-orthogonal to constants.
    Convergence is decided on the explicitly recomputed true residual.
    """
    t0 = time.perf_counter()
    n_u = op.n_u
    b = np.asarray(rhs, dtype=float).copy()
    if project_nullspace:
        e = np.zeros(op.n)
        e[n_u:] = 1.0
        b -= (e @ b) / (e @ e) * e

    norm_b = np.linalg.norm(b)
    x = np.zeros(op.n)

    precond_residuals = []

    def finish(it, converged, residuals):
        u = x[:n_u].copy()
        p = x[n_u:].copy()
        if project_nullspace and Q is not None:
            p = project_constant_pressure(p, Q)
        return SolverReport(it, converged, residuals,
                            time.perf_counter() - t0, u, p,
                            precond_residuals=precond_residuals)

    if norm_b == 0.0:
        return finish(0, True, [0.0])

    residuals = [1.0]
    if 1.0 <= tol:
        return finish(0, True, residuals)

    # Lanczos / MINRES recurrence (preconditioned, cf. ESW Algorithm 6.1)
    v_prev = np.zeros(op.n)
    v = b.copy()
    z = pc.apply(v, n_u)
    gamma_sq = z @ v
    if not np.isfinite(gamma_sq) or gamma_sq <= 0:
        raise MinresBreakdownError("preconditioner produced a non-positive norm")
    gamma = np.sqrt(gamma_sq)
    gamma_prev = 1.0
    eta = gamma
    precond_residuals.append(gamma)
    s_prev = s_curr = 0.0
    c_prev = c_curr = 1.0
    w = np.zeros(op.n)
    w_prev = np.zeros(op.n)

    for it in range(1, max_iters + 1):
        z_hat = z / gamma
        Az = op.matvec(z_hat)
        delta = z_hat @ Az
        v_next = Az - (delta / gamma) * v - (gamma / gamma_prev) * v_prev
        z_next = pc.apply(v_next, n_u)
        gamma_next_sq = z_next @ v_next
        if not np.isfinite(gamma_next_sq) or gamma_next_sq < 0:
            raise MinresBreakdownError("indefinite preconditioner inner product")
        gamma_next = np.sqrt(gamma_next_sq)

        a0 = c_curr * delta - c_prev * s_curr * gamma
        a1 = np.hypot(a0, gamma_next)
        a2 = s_curr * delta + c_prev * c_curr * gamma
        a3 = s_prev * gamma
        if a1 == 0.0:
            raise MinresBreakdownError("MINRES recurrence breakdown")
        c_next = a0 / a1
        s_next = gamma_next / a1

        w_next = (z_hat - a3 * w_prev - a2 * w) / a1
        x = x + c_next * eta * w_next
        eta = -s_next * eta
        precond_residuals.append(abs(eta))

        v_prev, v = v, v_next
        z = z_next
        gamma_prev, gamma = gamma, gamma_next
        w_prev, w = w, w_next
        c_prev, c_curr = c_curr, c_next
        s_prev, s_curr = s_curr, s_next

        if project_nullspace and Q is not None:
            x[n_u:] = project_constant_pressure(x[n_u:], Q)

        true_res = np.linalg.norm(b - op.matvec(x)) / norm_b
        if not np.isfinite(true_res):
            raise MinresBreakdownError("NaN in residual recurrence")
        residuals.append(true_res)
        if true_res <= tol:
            return finish(it, True, residuals)

    return finish(max_iters, False, residuals)

"""Numerical verification of the Schur-complement spectral bounds.

All routines here work on small meshes with dense eigensolves; they measure
the inf-sup and Poincare constants, the Schur-complement Rayleigh quotient
extremes, and the eigenvalues of the block-preconditioned saddle-point pencil,
for comparison with the predicted parameter-dependent intervals.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp

from . import fem
from .mesh import BoundaryTag
from .solvers import BlockOperator, SparseCholesky

ALPHA_MIN = -1.0 / 3.0
ALPHA_MAX = 1000.0
NULL_TOL = 1e-10


def predicted_constants(alpha, k_star, c1, cP):
    """Evaluate the predicted Schur-complement equivalence constants.

    Returns (c_lower, c_upper): the lower constant
    min((c1^2 + cP k_* (1+|a|)) / ((1+|a|)(1 + cP k_*)), 1) and the upper
    constant 1/(1-|a|) for -1/3 <= a < 0, 1 for a >= 0.
    """
    if not (ALPHA_MIN <= alpha <= ALPHA_MAX):
        raise ValueError(f"alpha={alpha} outside the analysed range "
                         f"[{ALPHA_MIN}, {ALPHA_MAX}]")
    if k_star < 0 or c1 <= 0 or cP <= 0:
        raise ValueError("k_star must be >= 0 and c1, cP > 0")
    aa = abs(alpha)
    c_upper = 1.0 / (1.0 - aa) if alpha < 0 else 1.0
    c_lower = min((c1 ** 2 + cP * k_star * (1.0 + aa))
                  / ((1.0 + aa) * (1.0 + cP * k_star)), 1.0)
    return c_lower, c_upper


def _zero_mean_basis(weight):
    """Orthonormal basis of the complement of the weighted constant, i.e.
    {q : q . weight = 0}, via a Householder reflection."""
    w = weight / np.linalg.norm(weight)
    e1 = np.zeros_like(w)
    e1[0] = 1.0
    u = w - e1
    nu = np.linalg.norm(u)
    H = np.eye(len(w))
    if nu > 0:
        u /= nu
        H -= 2.0 * np.outer(u, u)
    return H[:, 1:]


def _eliminate_all_dirichlet(mesh, vmap, M, B):
    """Zero rows/cols of a velocity matrix at boundary dofs (identity on the
    diagonal) and the matching columns of B."""
    dirich = vmap.boundary_dofs(BoundaryTag.ALL)
    if mesh.facet_tags.max() > 0:
        dirich = np.unique(np.concatenate(
            [vmap.boundary_dofs(t) for t in np.unique(mesh.facet_tags)]))
    mask = np.zeros(vmap.n_dofs, dtype=bool)
    mask[dirich] = True
    keep = sp.diags((~mask).astype(float))
    ident = sp.diags(mask.astype(float))
    return (keep @ M @ keep + ident).tocsr(), (B @ keep).tocsr()


def estimate_infsup(mesh, vmap, pmap):
    """Discrete inf-sup constant: sqrt of the smallest nonzero eigenvalue of
    B G^{-1} B^T q = lam Q q with G the full-gradient velocity stiffness under
    homogeneous Dirichlet conditions on the whole boundary."""
    G = fem.assemble_vector_laplacian(mesh, vmap)
    B = fem.assemble_B(mesh, vmap, pmap)
    Q = fem.assemble_Q(mesh, pmap)
    G, B = _eliminate_all_dirichlet(mesh, vmap, G, B)
    fG = SparseCholesky(G)
    Bt = B.T.toarray()
    Sg = B @ np.column_stack([fG.solve(Bt[:, j]) for j in range(Bt.shape[1])])
    lam = dla.eigvalsh(0.5 * (Sg + Sg.T), Q.toarray())
    lam = lam[lam > NULL_TOL]
    return float(np.sqrt(lam.min()))


def estimate_poincare(mesh, pmap):
    """Smallest nonzero eigenvalue of the P1 Neumann Laplacian relative to the
    mass matrix (tends to pi^2 on the unit square)."""
    C1 = fem.assemble_Ck(mesh, pmap, lambda x, z: np.ones_like(x))
    Q = fem.assemble_Q(mesh, pmap)
    lam = dla.eigvalsh(C1.toarray(), Q.toarray())
    lam = lam[lam > NULL_TOL]
    return float(lam.min())


def _schur_and_t(system):
    fA = SparseCholesky(system.A)
    Bt = system.B.T.toarray()
    S = system.B @ np.column_stack([fA.solve(Bt[:, j]) for j in range(Bt.shape[1])])
    S = 0.5 * (S + S.T) + system.C.toarray()
    T = (system.Q + system.C).toarray()
    return S, T


def schur_rayleigh_extremes(system):
    """Extreme generalized eigenvalues of S q = lam (Q + C_k) q over the
    zero-mean pressure space."""
    S, T = _schur_and_t(system)
    Z = _zero_mean_basis(system.Q @ np.ones(system.n_p))
    lam = dla.eigvalsh(Z.T @ S @ Z, Z.T @ T @ Z)
    return float(lam.min()), float(lam.max())


def dual_schur_extreme(system):
    """Largest generalized eigenvalue of B^T (Q + C_k)^{-1} B v = lam A v."""
    T = (system.Q + system.C).tocsr()
    fT = SparseCholesky(T)
    Bd = system.B.toarray()
    W = np.column_stack([fT.solve(Bd[:, j]) for j in range(Bd.shape[1])])
    M = Bd.T @ W
    lam = dla.eigvalsh(0.5 * (M + M.T), system.A.toarray())
    return float(lam.max())


def preconditioned_eigenvalues(system, P=None, T=None):
    """Eigenvalues of the block pencil, split by sign; the zero eigenvalue
    carried by the constant-pressure mode is excluded."""
    op = BlockOperator(system.A, system.B, system.C)
    K = op.dense()
    Pd = system.A.toarray() if P is None else sp.csr_matrix(P).toarray()
    Td = (system.Q + system.C).toarray() if T is None else sp.csr_matrix(T).toarray()
    M = dla.block_diag(Pd, Td)
    lam = dla.eigvalsh(K, M)
    neg = lam[lam < -NULL_TOL]
    pos = lam[lam > NULL_TOL]
    return neg, pos


def predicted_intervals(c_lower, c_upper, d_ap=(1.0, 1.0), d_qt=(1.0, 1.0)):
    """Predicted containment intervals for the pencil eigenvalues given the
    spectral-equivalence bounds (delta_low, delta_high) for P vs A and T vs
    Q + C_k.  Returns ((neg_lo, neg_hi), (pos_lo, pos_hi))."""
    dap_lo, dap_hi = d_ap
    dqt_lo, dqt_hi = d_qt
    neg_lo = -c_upper * dqt_hi
    neg_hi = 0.5 * (dap_lo - np.sqrt(dap_lo ** 2 + 4 * c_lower * dqt_lo * dap_lo))
    pos_lo = dap_lo
    pos_hi = dap_hi + c_upper * dqt_hi
    return (neg_lo, neg_hi), (pos_lo, pos_hi)


@dataclass
class BoundsReport:
    alpha: float
    k_star: float
    c1_est: float
    cP_est: float
    c_lower: float
    c_upper: float
    rayleigh_min: float
    rayleigh_max: float
    eig_neg_range: tuple
    eig_pos_range: tuple
    schur_contained: bool
    eigs_contained: bool

    CSV_HEADER = ("alpha,k_star,c1,cP,c_lower,c_upper,rayleigh_min,rayleigh_max,"
                  "neg_min,neg_max,pos_min,pos_max,schur_contained,eigs_contained")

    def csv_row(self):
        return (f"{self.alpha},{self.k_star},{self.c1_est:.6g},{self.cP_est:.6g},"
                f"{self.c_lower:.6g},{self.c_upper:.6g},"
                f"{self.rayleigh_min:.6g},{self.rayleigh_max:.6g},"
                f"{self.eig_neg_range[0]:.6g},{self.eig_neg_range[1]:.6g},"
                f"{self.eig_pos_range[0]:.6g},{self.eig_pos_range[1]:.6g},"
                f"{int(self.schur_contained)},{int(self.eigs_contained)}")

    def __str__(self):
        ok = "ok" if (self.schur_contained and self.eigs_contained) else "VIOLATED"
        return (f"alpha={self.alpha:g} k*={self.k_star:g}: "
                f"c1={self.c1_est:.4f} cP={self.cP_est:.4f} "
                f"predicted [{self.c_lower:.4f}, {self.c_upper:.4f}] "
                f"measured [{self.rayleigh_min:.4f}, {self.rayleigh_max:.4f}] "
                f"neg {self.eig_neg_range} pos {self.eig_pos_range} [{ok}]")


def bounds_report(system, mesh, vmap, pmap, k_star, tol=1e-8):
    """Run the full spectral verification for one assembled system."""
    c1 = estimate_infsup(mesh, vmap, pmap)
    cP = estimate_poincare(mesh, pmap)
    c_lo, c_hi = predicted_constants(system.alpha, k_star, c1, cP)
    rmin, rmax = schur_rayleigh_extremes(system)
    neg, pos = preconditioned_eigenvalues(system)
    (nlo, nhi), (plo, phi) = predicted_intervals(c_lo, c_hi)
    schur_ok = (rmin >= c_lo - tol) and (rmax <= c_hi + tol)
    eig_ok = True
    if len(neg):
        eig_ok &= neg.min() >= nlo - tol and neg.max() <= nhi + tol
    if len(pos):
        eig_ok &= pos.min() >= plo - tol and pos.max() <= phi + tol
    return BoundsReport(
        alpha=system.alpha, k_star=k_star, c1_est=c1, cP_est=cP,
        c_lower=c_lo, c_upper=c_hi, rayleigh_min=rmin, rayleigh_max=rmax,
        eig_neg_range=(float(neg.min()) if len(neg) else 0.0,
                       float(neg.max()) if len(neg) else 0.0),
        eig_pos_range=(float(pos.min()) if len(pos) else 0.0,
                       float(pos.max()) if len(pos) else 0.0),
        schur_contained=bool(schur_ok), eigs_contained=bool(eig_ok))

"""Smoothed-aggregation multigrid approximations of the block inverses.

The hierarchy construction is delegated to pyamg's smoothed aggregation
solver; this module fixes the configuration (symmetric smoothers so the
V-cycle operator is SPD and admissible inside MINRES) and exposes the cycle
action plus the contraction-factor diagnostics used by the property tests.
"""

from dataclasses import dataclass

import numpy as np
import pyamg
import scipy.sparse as sp

STRENGTH_THETA = 0.08
MAX_COARSE = 50


@dataclass
class SmootherConfig:
    kind: str = "chebyshev_jacobi"          # or "symmetric_gauss_seidel"
    applications: int = 2
    degree: int = 2

    def __post_init__(self):
        if self.applications < 1:
            raise ValueError("smoother applications must be >= 1")
        if self.kind not in ("chebyshev_jacobi", "symmetric_gauss_seidel"):
            raise ValueError(f"unknown smoother kind {self.kind!r}")

    def as_pyamg(self):
        if self.kind == "chebyshev_jacobi":
            return ("chebyshev", {"degree": self.degree,
                                  "iterations": self.applications})
        return ("symmetric_gauss_seidel", {"iterations": self.applications})


class AmgHierarchy:
    """Smoothed-aggregation hierarchy with a symmetric V-cycle action."""

    def __init__(self, ml):
        self.ml = ml
        self._pc = ml.aspreconditioner(cycle="V")
        self.n = ml.levels[0].A.shape[0]

    @property
    def level_sizes(self):
        return [lvl.A.shape[0] for lvl in self.ml.levels]

    def galerkin_defect(self):
        """Max relative deviation from coarse = P^T fine P across levels."""
        worst = 0.0
        for lvl, nxt in zip(self.ml.levels[:-1], self.ml.levels[1:]):
            ref = (lvl.P.T @ lvl.A @ lvl.P).tocsr()
            d = abs(nxt.A - ref).max() / max(abs(ref).max(), 1e-300)
            worst = max(worst, d)
        return worst

    def vcycle(self, b):
        """One V-cycle from a zero initial guess."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError("dimension mismatch")
        return self._pc @ b

    def summary(self):
        sizes = self.level_sizes
        nnz = [lvl.A.nnz for lvl in self.ml.levels]
        oc = sum(nnz) / nnz[0]
        lines = [f"levels: {len(sizes)}  operator complexity: {oc:.2f}"]
        for i, (s, z) in enumerate(zip(sizes, nnz)):
            lines.append(f"  level {i}: n={s} nnz={z}")
        return "\n".join(lines)


def sa_setup(M, near_nullspace, smoother: SmootherConfig | None = None):
    """Build a smoothed-aggregation hierarchy for an SPD matrix.

    near_nullspace is a list of vectors (rigid body modes for the velocity
    block, the constant vector for the pressure block).
    """
    if smoother is None:
        smoother = SmootherConfig()
    if not near_nullspace:
        raise ValueError("near_nullspace must be non-empty")
    B = np.column_stack([np.asarray(v, dtype=float) for v in near_nullspace])
    sm = smoother.as_pyamg()
    ml = pyamg.smoothed_aggregation_solver(
        sp.csr_matrix(M),
        B=B,
        strength=("symmetric", {"theta": STRENGTH_THETA}),
        smooth=("jacobi", {"omega": 4.0 / 3.0}),
        presmoother=sm,
        postsmoother=sm,
        max_coarse=MAX_COARSE,
        keep=False,
    )
    return AmgHierarchy(ml)


def rigid_body_modes(coords, n_scalar):
    """2D rigid body modes in the blocked vector layout: two translations
    and one rotation."""
    x = coords[:, 0]
    z = coords[:, 1]
    tx = np.concatenate([np.ones(n_scalar), np.zeros(n_scalar)])
    tz = np.concatenate([np.zeros(n_scalar), np.ones(n_scalar)])
    rot = np.concatenate([-z, x])
    return [tx, tz, rot]


def contraction_factor(h: AmgHierarchy, M, n_cycles=30, n_starts=3, seed=0):
    """Energy-norm contraction factor of the V-cycle error propagation,
    estimated by power iteration on e <- (I - V M) e."""
    rng = np.random.default_rng(seed)
    M = sp.csr_matrix(M)
    rho = 0.0
    for _ in range(n_starts):
        e = rng.standard_normal(h.n)
        norm = np.sqrt(e @ (M @ e))
        e /= norm
        ratio = 0.0
        for _ in range(n_cycles):
            e = e - h.vcycle(M @ e)
            new = np.sqrt(max(e @ (M @ e), 0.0))
            if new == 0.0:
                ratio = 0.0
                break
            ratio = new
            e /= new
        rho = max(rho, ratio)
    return rho


def rayleigh_bounds_check(h: AmgHierarchy, M, rho, n_vectors=50, seed=1):
    """Sample <Mv,v>/<Pv,v> with v = V-cycle(w) on random w; returns
    (min, max) which should lie inside [1 - rho, 1 + rho]."""
    rng = np.random.default_rng(seed)
    M = sp.csr_matrix(M)
    lo, hi = np.inf, -np.inf
    for _ in range(n_vectors):
        w = rng.standard_normal(h.n)
        v = h.vcycle(w)
        num = v @ (M @ v)
        den = w @ v
        r = num / den
        lo = min(lo, r)
        hi = max(hi, r)
    return lo, hi

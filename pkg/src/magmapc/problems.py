"""The three benchmark problems, their exact data, and the case driver.

The manufactured-solution source term is produced by symbolic differentiation
of the closed-form solution (sympy), evaluated pointwise at quadrature points.
"""

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as smp

from . import amg, fem, solvers
from .mesh import BoundaryTag, build_unit_square, build_wedge2d

_X, _Z = smp.symbols("x z", real=True)

ALPHA_MIN = -1.0 / 3.0
ALPHA_MAX = 1000.0


# ---------------------------------------------------------------------------
# physical parameters and scaling
# ---------------------------------------------------------------------------


@dataclass
class PhysicalParams:
    eta: float          # matrix shear viscosity [Pa s]
    zeta: float         # matrix bulk viscosity [Pa s]
    mu: float           # melt viscosity [Pa s]
    kappa0: float       # reference permeability [m^2]
    phi0: float         # reference porosity
    delta_rho: float    # density contrast [kg/m^3]
    g: float            # gravity [m/s^2]
    H: float            # length scale [m]

    def __post_init__(self):
        for name in ("eta", "zeta", "mu", "kappa0", "phi0", "delta_rho", "g", "H"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def r_zeta(self):
        return self.zeta / self.eta


def nondimensionalize(p: PhysicalParams):
    """Return (alpha, u0, delta, R): the bulk-viscosity coefficient, velocity
    scale, compaction length and its ratio to the domain scale."""
    alpha = (p.r_zeta - 2.0 / 3.0) / 2.0
    u0 = p.delta_rho * p.g * p.H ** 2 / (2.0 * p.eta)
    delta = np.sqrt((p.r_zeta + 4.0 / 3.0) * p.kappa0 * p.eta / p.mu)
    return alpha, u0, delta, delta / p.H


# ---------------------------------------------------------------------------
# coefficient fields and exact solutions
# ---------------------------------------------------------------------------


def _wrap_expr(expr):
    fn = smp.lambdify((_X, _Z), expr, modules="numpy")

    def field(x, z):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(fn(x, z), dtype=float), x.shape)

    field.expr = expr
    return field


def constant_field(value):
    return _wrap_expr(smp.Float(value))


def mms_kfield(k_star, k_sup):
    """Smooth tanh permeability field on the unit square with range
    [k_star, k_sup] (the endpoints are attained at the corners)."""
    if k_star > k_sup:
        raise ValueError("k_star must not exceed k_sup")
    if k_star == k_sup:
        return constant_field(k_star)
    d = smp.Float(k_sup) - smp.Float(k_star)
    s = smp.Float(k_sup) + smp.Float(k_star)
    th5 = smp.tanh(smp.Integer(5))
    expr = d / (4 * th5) * (
        smp.tanh(10 * _X - 5) + smp.tanh(10 * _Z - 5)
        + (2 * d - 2 * th5 * s) / (-d) + 2)
    return _wrap_expr(expr)


def wedge_kfield():
    """Permeability for the wedge cases: 0.9 (1 + tanh(-2 r)), r = |x|."""
    r = smp.sqrt(_X ** 2 + _Z ** 2)
    return _wrap_expr(smp.Float(0.9) * (1 + smp.tanh(-2 * r)))


def _mms_exact_exprs(k_expr):
    p = -smp.cos(4 * smp.pi * _X) * smp.cos(2 * smp.pi * _Z)
    ux = k_expr * smp.diff(p, _X) + smp.sin(smp.pi * _X) * smp.sin(2 * smp.pi * _Z) + 2
    uz = (k_expr * smp.diff(p, _Z)
          + smp.Rational(1, 2) * smp.cos(smp.pi * _X) * smp.cos(2 * smp.pi * _Z) + 2)
    return ux, uz, p


def mms_exact(k):
    """Exact (u_x, u_z, p) callables for the manufactured solution with
    permeability field k (which must carry a sympy expression)."""
    ux, uz, p = _mms_exact_exprs(k.expr)
    return _wrap_expr(ux), _wrap_expr(uz), _wrap_expr(p)


def mms_source(alpha, k):
    """Momentum source for the manufactured solution, from the symbolic
    residual -div eps(u) + grad p - alpha grad(div u)."""
    ux, uz, p = _mms_exact_exprs(k.expr)
    exx = smp.diff(ux, _X)
    ezz = smp.diff(uz, _Z)
    exz = (smp.diff(ux, _Z) + smp.diff(uz, _X)) / 2
    div_u = exx + ezz
    a = smp.Float(alpha)
    fx = -(smp.diff(exx, _X) + smp.diff(exz, _Z)) + smp.diff(p, _X) \
        - a * smp.diff(div_u, _X)
    fz = -(smp.diff(exz, _X) + smp.diff(ezz, _Z)) + smp.diff(p, _Z) \
        - a * smp.diff(div_u, _Z)
    fx_fn = _wrap_expr(fx)
    fz_fn = _wrap_expr(fz)

    def source(x, z):
        return fx_fn(x, z), fz_fn(x, z)

    source.expr = (fx, fz)
    return source


CORNER_BETA = np.pi / 4.0


def corner_flow_coefficients(beta=CORNER_BETA):
    den = beta ** 2 - np.sin(beta) ** 2
    C = beta * np.sin(beta) / den
    D = (beta * np.cos(beta) - np.sin(beta)) / den
    return C, D


def corner_velocity(x, z):
    """Analytic corner-flow velocity driven by the slab, in Cartesian
    components.  Singular at x = 0 (the wedge corner), which is rejected."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(x <= 0):
        raise ValueError("corner-flow velocity is singular at x <= 0")
    C, D = corner_flow_coefficients()
    theta = -np.arctan2(z - 1.0, x)
    st, ct = np.sin(theta), np.cos(theta)
    ur = C * theta * st + D * (st + theta * ct)
    ut = C * (st - theta * ct) + D * theta * st
    return ct * ur + st * ut, -st * ur + ct * ut


def slab_velocity(x, z):
    x = np.asarray(x, dtype=float)
    s = 1.0 / np.sqrt(2.0)
    return np.full_like(x, s), np.full_like(x, -s)


def zero_velocity(x, z):
    x = np.asarray(x, dtype=float)
    return np.zeros_like(x), np.zeros_like(x)


# ---------------------------------------------------------------------------
# postprocessing
# ---------------------------------------------------------------------------


def fluid_velocity(mesh, vmap, pmap, u, p, k, phi):
    """Cellwise magma velocity u_f = u - (k/phi)(grad p - e3) at centroids."""
    cent = mesh.vertices[mesh.cells].mean(axis=1)
    phiv = np.broadcast_to(np.asarray(phi(cent[:, 0], cent[:, 1]), float),
                           (mesh.n_cells,))
    if np.any(phiv <= 0):
        raise ValueError("porosity must be positive where evaluated")
    kv = np.broadcast_to(np.asarray(k(cent[:, 0], cent[:, 1]), float),
                         (mesh.n_cells,))
    gp = fem.p1_cell_gradients(mesh, pmap, p)
    gp = gp - np.array([0.0, 1.0])
    lam = np.full((1, 3), 1.0 / 3.0)
    bary = fem.p2_basis(lam)[0]
    ns = vmap.n_scalar
    cd = vmap.cell_to_dofs
    uc = np.stack([u[cd] @ bary, u[cd + ns] @ bary], axis=1)
    return uc - (kv / phiv)[:, None] * gp


def error_norms(mesh, vmap, pmap, u, p, exact_u, exact_p):
    """Quadrature L2 errors; the pressure error is computed after matching
    means (the discrete pressure is only defined up to a constant when the
    velocity is constrained on the whole boundary)."""
    geom = fem.CellGeometry(mesh)
    pts = geom.quad_points
    w = geom.area[:, None] * fem.QUAD_W[None, :]
    area = geom.area.sum()

    uh = fem.evaluate_p2_at_quad(mesh, vmap, u)
    uex = np.stack([exact_u[0](pts[..., 0], pts[..., 1]),
                    exact_u[1](pts[..., 0], pts[..., 1])], axis=2)
    vel_err = np.sqrt((w * ((uh - uex) ** 2).sum(axis=2)).sum())

    ph = fem.evaluate_p1_at_quad(mesh, pmap, p)
    pex = exact_p(pts[..., 0], pts[..., 1])
    e = ph - pex
    e = e - (w * e).sum() / area
    p_err = np.sqrt((w * e ** 2).sum())
    return float(vel_err), float(p_err)


# ---------------------------------------------------------------------------
# case driver
# ---------------------------------------------------------------------------

CASES = ("mms", "wedge-corner", "wedge-traction")
WEDGE_POROSITY = 0.01


@dataclass
class CaseConfig:
    case: str
    n: int = 32
    alpha: float = 1.0
    k_star: float = 0.5
    k_sup: float = 1.5
    pc: str = "lu"
    tol: float = 1e-8
    max_iters: int = 5000
    smoother: amg.SmootherConfig | None = None

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")
        if not (ALPHA_MIN <= self.alpha <= ALPHA_MAX):
            raise ValueError(f"alpha must be in [{ALPHA_MIN}, {ALPHA_MAX}]")
        if not (0 <= self.k_star <= self.k_sup):
            raise ValueError("need 0 <= k_star <= k_sup")
        if self.pc not in ("lu", "amg"):
            raise ValueError("pc must be 'lu' or 'amg'")
        if self.n < 1 or (self.case != "mms" and self.n < 2):
            raise ValueError("mesh parameter too small for this case")


@dataclass
class CaseResult:
    config: CaseConfig
    report: solvers.SolverReport
    n_dofs: int
    vel_err: float | None = None
    p_err: float | None = None
    seconds: float = 0.0
    mesh: object = None
    vmap: object = None
    pmap: object = None
    kfield: object = None

    CSV_HEADER = ("case,n,N_dofs,alpha,k_star,k_sup,pc,iterations,converged,"
                  "vel_err,p_err,seconds")

    @property
    def iterations(self):
        return self.report.iterations

    @property
    def converged(self):
        return self.report.converged

    def csv_row(self):
        c = self.config
        ve = "" if self.vel_err is None else f"{self.vel_err:.6e}"
        pe = "" if self.p_err is None else f"{self.p_err:.6e}"
        return (f"{c.case},{c.n},{self.n_dofs},{c.alpha:g},{c.k_star:g},"
                f"{c.k_sup:g},{c.pc},{self.report.iterations},"
                f"{int(self.report.converged)},{ve},{pe},{self.seconds:.3f}")


def default_smoother(alpha):
    # large grad-div weight needs the heavier smoothing reported alongside it
    if alpha >= 1000:
        return amg.SmootherConfig(kind="symmetric_gauss_seidel", applications=4)
    return amg.SmootherConfig()


def build_preconditioner(cfg: CaseConfig, system, vmap):
    T = (system.Q + system.C).tocsr()
    if cfg.pc == "lu":
        return solvers.exact_preconditioner(system.A, T)
    sm = cfg.smoother or default_smoother(cfg.alpha)
    scalar_coords = vmap.dof_coords
    hP = amg.sa_setup(system.A,
                      amg.rigid_body_modes(scalar_coords, vmap.n_scalar), sm)
    hT = amg.sa_setup(T, [np.ones(T.shape[0])], sm)
    return solvers.BlockDiagPreconditioner(hP.vcycle, hT.vcycle, label="AMG")


def assemble_case(cfg: CaseConfig):
    """Mesh, spaces, block system with boundary conditions applied, and the
    exact solution callables where available."""
    if cfg.case == "mms":
        mesh = build_unit_square(cfg.n)
        vmap, pmap = fem.taylor_hood(mesh)
        k = mms_kfield(cfg.k_star, cfg.k_sup)
        src = mms_source(cfg.alpha, k)
        system = fem.assemble_system(mesh, vmap, pmap, cfg.alpha, k,
                                     f_extra=src, g_from_gravity=False)
        ux, uz, p = mms_exact(k)
        bcs = [(BoundaryTag.ALL, lambda x, z: (ux(x, z), uz(x, z)))]
        exact = ((ux, uz), p)
    else:
        mesh = build_wedge2d(cfg.n)
        vmap, pmap = fem.taylor_hood(mesh)
        k = wedge_kfield()
        system = fem.assemble_system(mesh, vmap, pmap, cfg.alpha, k,
                                     phi=constant_field(WEDGE_POROSITY))
        bcs = [(BoundaryTag.OVERPLATE, zero_velocity)]
        if cfg.case == "wedge-corner":
            bcs.append((BoundaryTag.OPEN, corner_velocity))
        bcs.append((BoundaryTag.SLAB, slab_velocity))
        exact = None
    system = fem.apply_dirichlet(system, vmap, bcs)
    return mesh, vmap, pmap, system, k, exact


def run_case(cfg: CaseConfig):
    """Assemble, precondition, solve, and (where exact data exist) measure
    discretisation errors."""
    t0 = time.perf_counter()
    mesh, vmap, pmap, system, k, exact = assemble_case(cfg)
    pc = build_preconditioner(cfg, system, vmap)
    op = solvers.BlockOperator(system.A, system.B, system.C)
    rhs = np.concatenate([system.f, system.g])
    report = solvers.minres(op, pc, rhs, tol=cfg.tol, max_iters=cfg.max_iters,
                            project_nullspace=system.has_pressure_nullspace,
                            Q=system.Q)
    vel_err = p_err = None
    if exact is not None and report.converged:
        vel_err, p_err = error_norms(mesh, vmap, pmap, report.u, report.p,
                                     exact[0], exact[1])
    return CaseResult(cfg, report, n_dofs=system.n_u + system.n_p,
                      vel_err=vel_err, p_err=p_err,
                      seconds=time.perf_counter() - t0,
                      mesh=mesh, vmap=vmap, pmap=pmap, kfield=k)

"""Taylor-Hood (P2-P1) spaces and assembly of the saddle-point block system.

Velocity uses continuous piecewise quadratics (vector valued, blocked layout:
x-components first, then z-components), pressure continuous piecewise linears.
All forms are integrated with a single degree-6 symmetric triangle rule.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .mesh import BoundaryTag, Mesh

# ---------------------------------------------------------------------------
# quadrature: 12-point symmetric rule, exact for degree <= 6
# ---------------------------------------------------------------------------


def _dunavant6():
    pts = []
    wts = []

    def orbit3(w, a, b):
        for lam in [(a, b, b), (b, a, b), (b, b, a)]:
            pts.append(lam)
            wts.append(w)

    def orbit6(w, a, b, c):
        for lam in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]:
            pts.append(lam)
            wts.append(w)

    orbit3(0.116786275726379, 0.501426509658179, 0.249286745170910)
    orbit3(0.050844906370207, 0.873821971016996, 0.063089014491502)
    orbit6(0.082851075618374, 0.053145049844816, 0.310352451033785, 0.636502499121399)
    lam = np.array(pts)          # barycentric (lam0, lam1, lam2)
    w = np.array(wts)            # sums to 1; integral = area * sum(w_q f_q)
    return lam, w


QUAD_LAMBDA, QUAD_W = _dunavant6()
QUAD_XI = QUAD_LAMBDA[:, 1:3]    # reference coordinates (xi, eta)


def p1_basis(lam):
    return lam.copy()


def p1_grad_ref():
    # gradients of (lam0, lam1, lam2) w.r.t. (xi, eta)
    return np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_basis(lam):
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l0 * l2, 4 * l0 * l1,
    ])


def p2_grad_ref(lam):
    nq = lam.shape[0]
    dl = p1_grad_ref()            # (3, 2)
    g = np.zeros((nq, 6, 2))
    for i in range(3):
        g[:, i, :] = (4 * lam[:, i] - 1)[:, None] * dl[i]
    g[:, 3, :] = 4 * (lam[:, 2][:, None] * dl[1] + lam[:, 1][:, None] * dl[2])
    g[:, 4, :] = 4 * (lam[:, 2][:, None] * dl[0] + lam[:, 0][:, None] * dl[2])
    g[:, 5, :] = 4 * (lam[:, 1][:, None] * dl[0] + lam[:, 0][:, None] * dl[1])
    return g


P1_AT_QUAD = p1_basis(QUAD_LAMBDA)          # (nq, 3)
P2_AT_QUAD = p2_basis(QUAD_LAMBDA)          # (nq, 6)
P1_GRAD_REF = p1_grad_ref()                 # (3, 2)
P2_GRAD_REF = p2_grad_ref(QUAD_LAMBDA)      # (nq, 6, 2)


# ---------------------------------------------------------------------------
# dof maps
# ---------------------------------------------------------------------------


class SpaceKind(Enum):
    P1_SCALAR = "p1_scalar"
    P2_VECTOR = "p2_vector"


def _cell_edges(cells):
    """Unique sorted-vertex-pair edges and the per-cell edge indices.

    Local edge order matches the P2 midpoint dofs: opposite vertex 0, 1, 2,
    i.e. edges (1,2), (0,2), (0,1).
    """
    local = np.concatenate([cells[:, [1, 2]], cells[:, [0, 2]], cells[:, [0, 1]]])
    key = np.sort(local, axis=1)
    edges, inv = np.unique(key, axis=0, return_inverse=True)
    nc = cells.shape[0]
    cell_edge = np.column_stack([inv[:nc], inv[nc:2 * nc], inv[2 * nc:]])
    return edges, cell_edge


class DofMap:
    """Global dof numbering for one of the two Taylor-Hood spaces."""

    def __init__(self, mesh: Mesh, kind: SpaceKind):
        self.mesh = mesh
        self.kind = kind
        nv = mesh.n_vertices
        if kind == SpaceKind.P1_SCALAR:
            self.n_scalar = nv
            self.n_dofs = nv
            self.cell_to_dofs = mesh.cells.copy()
            self.dof_coords = mesh.vertices.copy()
        else:
            edges, cell_edge = _cell_edges(mesh.cells)
            self.edges = edges
            self._edge_lookup = {tuple(e): i for i, e in enumerate(edges)}
            self.n_scalar = nv + len(edges)
            self.n_dofs = 2 * self.n_scalar
            self.cell_to_dofs = np.hstack([mesh.cells, nv + cell_edge])
            mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
            self.dof_coords = np.vstack([mesh.vertices, mids])

    def boundary_scalar_dofs(self, tag):
        """Scalar dofs sitting on facets carrying the given tag."""
        facets = self.mesh.facets_with_tag(tag)
        dofs = set(facets.ravel().tolist())
        if self.kind == SpaceKind.P2_VECTOR:
            nv = self.mesh.n_vertices
            for a, b in facets:
                dofs.add(nv + self._edge_lookup[(min(a, b), max(a, b))])
        return np.array(sorted(dofs), dtype=np.int64)

    def boundary_dofs(self, tag):
        """Global dofs on the tagged facets (both components for the vector space)."""
        s = self.boundary_scalar_dofs(tag)
        if self.kind == SpaceKind.P1_SCALAR:
            return s
        return np.concatenate([s, s + self.n_scalar])


def taylor_hood(mesh: Mesh):
    return DofMap(mesh, SpaceKind.P2_VECTOR), DofMap(mesh, SpaceKind.P1_SCALAR)


# ---------------------------------------------------------------------------
# geometry tables shared by the assemblers
# ---------------------------------------------------------------------------


class CellGeometry:
    def __init__(self, mesh: Mesh):
        v = mesh.vertices
        p0 = v[mesh.cells[:, 0]]
        p1 = v[mesh.cells[:, 1]]
        p2 = v[mesh.cells[:, 2]]
        J = np.stack([p1 - p0, p2 - p0], axis=2)      # (nc, 2, 2), columns are edges
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(det <= 0):
            raise ValueError("mesh contains non-positively oriented cells")
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1]
        inv[:, 0, 1] = -J[:, 0, 1]
        inv[:, 1, 0] = -J[:, 1, 0]
        inv[:, 1, 1] = J[:, 0, 0]
        inv /= det[:, None, None]
        self.area = 0.5 * det
        self.jinv_t = np.transpose(inv, (0, 2, 1))    # J^{-T}
        # physical quadrature points: (nc, nq, 2)
        self.quad_points = p0[:, None, :] + np.einsum("cde,qe->cqd", J, QUAD_XI)
        # physical basis gradients at quadrature points
        self.grad_p1 = np.einsum("cde,ie->cid", self.jinv_t, P1_GRAD_REF)      # (nc,3,2)
        self.grad_p2 = np.einsum("cde,qie->cqid", self.jinv_t, P2_GRAD_REF)    # (nc,nq,6,2)


def _scatter(rows, cols, vals, shape):
    m = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return m.tocsr()


def _sample_field(field, points):
    """Evaluate a scalar field callable on (..., 2) points."""
    x, z = points[..., 0], points[..., 1]
    return np.broadcast_to(np.asarray(field(x, z), dtype=float), x.shape).copy()


# ---------------------------------------------------------------------------
# matrix assembly
# ---------------------------------------------------------------------------


def _velocity_form(mesh, vmap, weight_eps, weight_div):
    """Assemble w_eps * (eps(u), eps(v)) + w_div * (div u, div v) on P2 vectors."""
    geom = CellGeometry(mesh)
    G = geom.grad_p2
    wq = QUAD_W
    # X[c,i,a,j,b] = int dN_i/dx_a dN_j/dx_b
    X = np.einsum("c,q,cqia,cqjb->ciajb", geom.area, wq, G, G, optimize=True)
    S = np.einsum("ciaja->cij", X)                      # grad-grad contraction
    loc = np.zeros((mesh.n_cells, 2, 6, 2, 6))
    if weight_eps != 0.0:
        half = 0.5 * weight_eps
        for a in range(2):
            loc[:, a, :, a, :] += half * S
        # (eps:eps) cross part: 0.5 * dN_i/dx_b dN_j/dx_a
        loc += half * np.transpose(X, (0, 4, 1, 2, 3))
    if weight_div != 0.0:
        # (div u)(div v): dN_i/dx_a dN_j/dx_b
        loc += weight_div * np.transpose(X, (0, 2, 1, 4, 3))
    ns = vmap.n_scalar
    cd = vmap.cell_to_dofs                              # (nc, 6)
    gdofs = np.stack([cd, cd + ns], axis=1)             # (nc, 2, 6)
    rows = np.broadcast_to(gdofs[:, :, :, None, None], loc.shape)
    cols = np.broadcast_to(gdofs[:, None, None, :, :], loc.shape)
    return _scatter(rows, cols, loc, (vmap.n_dofs, vmap.n_dofs))


def assemble_A(mesh, vmap, alpha):
    """Velocity operator (eps(u), eps(v)) + alpha (div u, div v); requires alpha > -1."""
    if alpha <= -1.0:
        raise ValueError("alpha must be > -1 for coercivity")
    return _velocity_form(mesh, vmap, 1.0, alpha)


def assemble_eps_matrix(mesh, vmap):
    return _velocity_form(mesh, vmap, 1.0, 0.0)


def assemble_div_matrix(mesh, vmap):
    """Matrix of (div u, div v); A(alpha) = A(0) + alpha * this."""
    return _velocity_form(mesh, vmap, 0.0, 1.0)


def assemble_vector_laplacian(mesh, vmap):
    """Full-gradient stiffness (grad u, grad v) on the vector P2 space."""
    geom = CellGeometry(mesh)
    G = geom.grad_p2
    S = np.einsum("c,q,cqid,cqjd->cij", geom.area, QUAD_W, G, G, optimize=True)
    ns = vmap.n_scalar
    cd = vmap.cell_to_dofs
    loc = np.zeros((mesh.n_cells, 2, 6, 2, 6))
    for a in range(2):
        loc[:, a, :, a, :] = S
    gdofs = np.stack([cd, cd + ns], axis=1)
    rows = np.broadcast_to(gdofs[:, :, :, None, None], loc.shape)
    cols = np.broadcast_to(gdofs[:, None, None, :, :], loc.shape)
    return _scatter(rows, cols, loc, (vmap.n_dofs, vmap.n_dofs))


def assemble_B(mesh, vmap, pmap):
    """Divergence coupling: entry (i, (a,j)) = -int psi_i dN_j/dx_a."""
    geom = CellGeometry(mesh)
    loc = -np.einsum("c,q,qi,cqja->ciaj", geom.area, QUAD_W, P1_AT_QUAD,
                     geom.grad_p2, optimize=True)       # (nc, 3, 2, 6)
    ns = vmap.n_scalar
    prows = np.broadcast_to(pmap.cell_to_dofs[:, :, None, None], loc.shape)
    vcols = np.stack([vmap.cell_to_dofs, vmap.cell_to_dofs + ns], axis=1)  # (nc,2,6)
    vcols = np.broadcast_to(vcols[:, None, :, :], loc.shape)
    return _scatter(prows, vcols, loc, (pmap.n_dofs, vmap.n_dofs))


def assemble_Ck(mesh, pmap, k):
    """Permeability-weighted pressure stiffness int k grad p . grad q."""
    geom = CellGeometry(mesh)
    kq = _sample_field(k, geom.quad_points)
    if np.any(kq < 0):
        raise ValueError("permeability is negative at a quadrature point")
    G = geom.grad_p1
    loc = np.einsum("c,q,cq,cid,cjd->cij", geom.area, QUAD_W, kq, G, G, optimize=True)
    cd = pmap.cell_to_dofs
    rows = np.broadcast_to(cd[:, :, None], loc.shape)
    cols = np.broadcast_to(cd[:, None, :], loc.shape)
    return _scatter(rows, cols, loc, (pmap.n_dofs, pmap.n_dofs))


def assemble_Q(mesh, pmap):
    """P1 pressure mass matrix."""
    geom = CellGeometry(mesh)
    loc = np.einsum("c,q,qi,qj->cij", geom.area, QUAD_W, P1_AT_QUAD, P1_AT_QUAD)
    cd = pmap.cell_to_dofs
    rows = np.broadcast_to(cd[:, :, None], loc.shape)
    cols = np.broadcast_to(cd[:, None, :], loc.shape)
    return _scatter(rows, cols, loc, (pmap.n_dofs, pmap.n_dofs))


def assemble_rhs(mesh, vmap, pmap, phi=None, k=None, f_extra=None):
    """Load vectors: f from the buoyancy term phi*e3 (plus an optional explicit
    body force), g from the gravity part of the Darcy flux, -int k e3 . grad q."""
    geom = CellGeometry(mesh)
    pts = geom.quad_points
    ns = vmap.n_scalar
    f = np.zeros(vmap.n_dofs)
    g = np.zeros(pmap.n_dofs)

    load = np.zeros((mesh.n_cells, pts.shape[1], 2))    # (nc, nq, 2)
    if phi is not None:
        load[:, :, 1] += _sample_field(phi, pts)
    if f_extra is not None:
        fx, fz = f_extra(pts[..., 0], pts[..., 1])
        load[:, :, 0] += fx
        load[:, :, 1] += fz
    if phi is not None or f_extra is not None:
        floc = np.einsum("c,q,cqa,qi->cai", geom.area, QUAD_W, load, P2_AT_QUAD)
        cd = vmap.cell_to_dofs
        gdofs = np.stack([cd, cd + ns], axis=1)
        np.add.at(f, gdofs.ravel(), floc.ravel())

    if k is not None:
        kq = _sample_field(k, pts)
        gloc = -np.einsum("c,q,cq,ci->ci", geom.area, QUAD_W, kq,
                          geom.grad_p1[:, :, 1])
        np.add.at(g, pmap.cell_to_dofs.ravel(), gloc.ravel())
    return f, g


# ---------------------------------------------------------------------------
# block system and boundary conditions
# ---------------------------------------------------------------------------


@dataclass
class BlockSystem:
    """Assembled saddle-point system [A B^T; B -C] [u; p] = [f; g]."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    Q: sp.csr_matrix
    f: np.ndarray
    g: np.ndarray
    alpha: float
    has_pressure_nullspace: bool = False
    dirichlet_dofs: np.ndarray | None = None

    @property
    def n_u(self):
        return self.A.shape[0]

    @property
    def n_p(self):
        return self.Q.shape[0]


def assemble_system(mesh, vmap, pmap, alpha, k, phi=None, f_extra=None,
                    g_from_gravity=True):
    """Assemble all blocks.  g_from_gravity controls whether the -int k e3.grad q
    load is included (it is dropped for the manufactured-solution case, whose
    mass equation carries no gravity term)."""
    A = assemble_A(mesh, vmap, alpha)
    B = assemble_B(mesh, vmap, pmap)
    C = assemble_Ck(mesh, pmap, k)
    Q = assemble_Q(mesh, pmap)
    f, g = assemble_rhs(mesh, vmap, pmap, phi=phi,
                        k=k if g_from_gravity else None, f_extra=f_extra)
    return BlockSystem(A, B, C, Q, f, g, alpha)


def apply_dirichlet(system: BlockSystem, vmap: DofMap, bcs):
    """Symmetric elimination of velocity Dirichlet conditions.

    bcs is a list of (tag, gfun) pairs, gfun(x, z) -> (gx, gz); later entries
    win at shared dofs.  Returns a new BlockSystem; the eliminated rows of A
    become identity rows carrying the boundary values in f.
    """
    mesh = vmap.mesh
    n_u = system.n_u
    ns = vmap.n_scalar
    u_d = np.zeros(n_u)
    is_dir = np.zeros(n_u, dtype=bool)
    tagged = set()
    for tag, gfun in bcs:
        sdofs = vmap.boundary_scalar_dofs(tag)
        coords = vmap.dof_coords[sdofs]
        gx, gz = gfun(coords[:, 0], coords[:, 1])
        u_d[sdofs] = gx
        u_d[sdofs + ns] = gz
        is_dir[sdofs] = True
        is_dir[sdofs + ns] = True
        tagged.add(int(tag))

    keep = sp.diags((~is_dir).astype(float))
    ident = sp.diags(is_dir.astype(float))
    A = (keep @ system.A @ keep + ident).tocsr()
    B = (system.B @ keep).tocsr()
    f = system.f - system.A @ u_d
    f[is_dir] = u_d[is_dir]
    g = system.g - system.B @ u_d

    all_tags = set(int(t) for t in system_boundary_tags(mesh))
    covers_all = (int(BoundaryTag.ALL) in tagged) or all_tags.issubset(tagged)
    return replace(system, A=A, B=B, f=f, g=g,
                   has_pressure_nullspace=covers_all,
                   dirichlet_dofs=np.flatnonzero(is_dir))


def system_boundary_tags(mesh: Mesh):
    return np.unique(mesh.facet_tags)


# ---------------------------------------------------------------------------
# field evaluation helpers
# ---------------------------------------------------------------------------


def evaluate_p2_at_quad(mesh, vmap, u):
    """Values of a P2 vector coefficient field at quadrature points: (nc, nq, 2)."""
    ns = vmap.n_scalar
    cd = vmap.cell_to_dofs
    vals_x = np.einsum("qi,ci->cq", P2_AT_QUAD, u[cd])
    vals_z = np.einsum("qi,ci->cq", P2_AT_QUAD, u[cd + ns])
    return np.stack([vals_x, vals_z], axis=2)


def evaluate_p1_at_quad(mesh, pmap, p):
    return np.einsum("qi,ci->cq", P1_AT_QUAD, p[pmap.cell_to_dofs])


def p1_cell_gradients(mesh, pmap, p):
    """Cellwise-constant gradient of a P1 field: (nc, 2)."""
    geom = CellGeometry(mesh)
    return np.einsum("cid,ci->cd", geom.grad_p1, p[pmap.cell_to_dofs])

"""Deterministic structured triangulations of the unit square and the 2D wedge."""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class BoundaryTag(IntEnum):
    ALL = 0
    SLAB = 1        # Gamma_1: the inclined slab surface x + z = 1
    OVERPLATE = 2   # Gamma_2: the overplate, z = 1
    OPEN = 3        # Gamma_3: open boundary (right side x = 1.5 and bottom z = 0)


GEOM_TOL = 1e-10


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh with tagged boundary facets.

    vertices: (nv, 2) coordinates, cells: (nc, 3) vertex indices with positive
    signed area, boundary_facets: (nf, 2) vertex pairs, facet_tags: (nf,).
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: np.ndarray
    facet_tags: np.ndarray

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)
        self.boundary_facets.setflags(write=False)
        self.facet_tags.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def cell_areas(self):
        v = self.vertices
        p0 = v[self.cells[:, 0]]
        p1 = v[self.cells[:, 1]]
        p2 = v[self.cells[:, 2]]
        e1 = p1 - p0
        e2 = p2 - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def facets_with_tag(self, tag):
        if tag == BoundaryTag.ALL:
            return self.boundary_facets
        return self.boundary_facets[self.facet_tags == int(tag)]


def _structured_square_topology(n):
    """Vertices on an (n+1)^2 grid and 2n^2 triangles, diagonal SW-NE."""
    xs = np.linspace(0.0, 1.0, n + 1)
    xi, eta = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xi.ravel(), eta.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    cells = []
    for iy in range(n):
        for ix in range(n):
            v00 = vid(ix, iy)
            v10 = vid(ix + 1, iy)
            v01 = vid(ix, iy + 1)
            v11 = vid(ix + 1, iy + 1)
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return vertices, np.asarray(cells, dtype=np.int64)


def boundary_edges(cells):
    """Edges appearing in exactly one cell, in deterministic order."""
    edges = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    sel = np.sort(idx[counts == 1])
    return np.sort(edges[sel], axis=1)


def _tag_facets(vertices, facets, predicates):
    """First matching predicate wins; every facet must match one."""
    tags = np.empty(len(facets), dtype=np.int64)
    mids_a = vertices[facets[:, 0]]
    mids_b = vertices[facets[:, 1]]
    for i in range(len(facets)):
        for tag, pred in predicates:
            if pred(mids_a[i]) and pred(mids_b[i]):
                tags[i] = int(tag)
                break
        else:
            raise ValueError(f"untagged boundary facet {facets[i]}")
    return tags


def build_unit_square(n):
    """Regular n x n mesh of the unit square, each square split into two triangles."""
    if n < 1:
        raise ValueError("n must be >= 1")
    vertices, cells = _structured_square_topology(n)
    facets = boundary_edges(cells)
    tags = np.full(len(facets), int(BoundaryTag.ALL), dtype=np.int64)
    return Mesh(vertices, cells, facets, tags)


def build_wedge2d(n):
    """Mapped structured mesh of the subduction wedge trapezoid.

    The unit square (xi, eta) is mapped by z = eta, x = (1 - eta) + xi*(0.5 + eta),
    giving corners (1,0), (1.5,0), (0,1), (1.5,1).  Top edge has length 1.5,
    bottom edge 0.5, depth 1.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    ref, cells = _structured_square_topology(n)
    xi, eta = ref[:, 0], ref[:, 1]
    x = (1.0 - eta) + xi * (0.5 + eta)
    z = eta
    vertices = np.column_stack([x, z])
    facets = boundary_edges(cells)
    predicates = [
        (BoundaryTag.SLAB, lambda p: abs(p[0] + p[1] - 1.0) < GEOM_TOL),
        (BoundaryTag.OVERPLATE, lambda p: abs(p[1] - 1.0) < GEOM_TOL),
        (BoundaryTag.OPEN,
         lambda p: abs(p[0] - 1.5) < GEOM_TOL or abs(p[1]) < GEOM_TOL),
    ]
    tags = _tag_facets(vertices, facets, predicates)
    return Mesh(vertices, cells, facets, tags)

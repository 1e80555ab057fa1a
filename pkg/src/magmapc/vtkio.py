"""Legacy ASCII VTK export of the triangle mesh and solution fields."""

import numpy as np

VTK_TRIANGLE = 5


def write_vtk(path, mesh, point_scalars=None, point_vectors=None,
              cell_vectors=None, title="magmapc fields"):
    """Write an unstructured-grid VTK file.

    point_scalars / point_vectors / cell_vectors are dicts mapping a field
    name to per-vertex values, per-vertex 2D vectors, or per-cell 2D vectors.
    """
    point_scalars = point_scalars or {}
    point_vectors = point_vectors or {}
    cell_vectors = cell_vectors or {}
    nv = mesh.n_vertices
    nc = mesh.n_cells
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, z in mesh.vertices:
            fh.write(f"{x:.12g} {z:.12g} 0.0\n")
        fh.write(f"CELLS {nc} {4 * nc}\n")
        for a, b, c in mesh.cells:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nc}\n")
        fh.write("\n".join([str(VTK_TRIANGLE)] * nc) + "\n")

        if point_scalars or point_vectors:
            fh.write(f"POINT_DATA {nv}\n")
            for name, vals in point_scalars.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(vals):
                    fh.write(f"{v:.12g}\n")
            for name, vecs in point_vectors.items():
                fh.write(f"VECTORS {name} double\n")
                for vx, vz in np.asarray(vecs):
                    fh.write(f"{vx:.12g} {vz:.12g} 0.0\n")
        if cell_vectors:
            fh.write(f"CELL_DATA {nc}\n")
            for name, vecs in cell_vectors.items():
                fh.write(f"VECTORS {name} double\n")
                for vx, vz in np.asarray(vecs):
                    fh.write(f"{vx:.12g} {vz:.12g} 0.0\n")

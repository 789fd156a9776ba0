"""Structured triangulations of the unit square.

Meshes are built as n-by-n grids of squares, each split along the
lower-left to upper-right diagonal.  All triangles are oriented
counterclockwise.  Boundary edges carry one of the side markers
'left', 'right', 'bottom', 'top'.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIDES = ("left", "right", "bottom", "top")

_GEOM_TOL = 1e-12


def _cross2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """z-component of the cross product of 2D vectors."""
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of [0,1]^2.

    vertices: (nv, 2) coordinates.
    triangles: (nt, 3) vertex indices, counterclockwise.
    edges: (ne, 2) vertex index pairs, sorted within each pair.
    edge_tris: list of triangle indices incident to each edge (1 or 2).
    boundary_edges: indices into `edges` lying on the boundary.
    boundary_markers: side name per boundary edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(default=None)
    edge_tris: list = field(default=None)
    boundary_edges: np.ndarray = field(default=None)
    boundary_markers: list = field(default=None)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return 0.5 * _cross2(b - a, c - a)

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def _side_of_edge(p: np.ndarray, q: np.ndarray) -> str | None:
    if abs(p[0]) < _GEOM_TOL and abs(q[0]) < _GEOM_TOL:
        return "left"
    if abs(p[0] - 1.0) < _GEOM_TOL and abs(q[0] - 1.0) < _GEOM_TOL:
        return "right"
    if abs(p[1]) < _GEOM_TOL and abs(q[1]) < _GEOM_TOL:
        return "bottom"
    if abs(p[1] - 1.0) < _GEOM_TOL and abs(q[1] - 1.0) < _GEOM_TOL:
        return "top"
    return None


def _finalize(vertices: np.ndarray, triangles: np.ndarray) -> Mesh:
    """Derive edges, adjacency and boundary markers; validate orientation."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)

    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    areas = 0.5 * _cross2(b - a, c - a)
    if np.any(areas <= 0):
        raise MeshError("mesh contains non-positively-oriented triangles")

    pairs = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    pairs.sort(axis=1)
    edges, inv = np.unique(pairs, axis=0, return_inverse=True)

    edge_tris: list[list[int]] = [[] for _ in range(edges.shape[0])]
    nt = triangles.shape[0]
    for k, e in enumerate(inv):
        edge_tris[e].append(k % nt)

    boundary_edges = []
    boundary_markers = []
    for ei, tris in enumerate(edge_tris):
        if len(tris) == 1:
            side = _side_of_edge(vertices[edges[ei, 0]], vertices[edges[ei, 1]])
            if side is None:
                raise MeshError(f"boundary edge {ei} not on any side of the square")
            boundary_edges.append(ei)
            boundary_markers.append(side)
        elif len(tris) != 2:
            raise MeshError(f"edge {ei} shared by {len(tris)} triangles")

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_tris=edge_tris,
        boundary_edges=np.asarray(boundary_edges, dtype=np.int64),
        boundary_markers=boundary_markers,
    )


def build_unit_square_mesh(n: int) -> Mesh:
    """n-by-n structured mesh: (n+1)^2 vertices, 2n^2 triangles, h = 1/n."""
    if n < 1:
        raise MeshError(f"mesh subdivision must be >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):  # column i, row j
        return j * (n + 1) + i

    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for j in range(n):
        for i in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            # diagonal v00 -> v11
            triangles[k] = (v00, v10, v11)
            triangles[k + 1] = (v00, v11, v01)
            k += 2
    return _finalize(vertices, triangles)


def barycentric_refine(mesh: Mesh) -> Mesh:
    """Split each triangle into 3 at its barycenter."""
    nv = mesh.n_vertices
    bary = mesh.barycenters()
    vertices = np.vstack([mesh.vertices, bary])
    tris = []
    for k, (i, j, l) in enumerate(mesh.triangles):
        m = nv + k
        tris.append((i, j, m))
        tris.append((j, l, m))
        tris.append((l, i, m))
    return _finalize(vertices, np.asarray(tris, dtype=np.int64))


def build_cell_map(fine: Mesh, coarse: Mesh) -> np.ndarray:
    """Assign each fine triangle to the coarse triangle containing its barycenter.

    Ties on coarse-cell edges go to the lowest coarse index.  Returns an
    (nt_fine,) index array.
    """
    pts = fine.barycenters()
    a = coarse.vertices[coarse.triangles[:, 0]]
    b = coarse.vertices[coarse.triangles[:, 1]]
    c = coarse.vertices[coarse.triangles[:, 2]]
    area2 = _cross2(b - a, c - a)  # 2*area, positive

    # barycentric coordinates of every point in every coarse triangle
    d = pts[:, None, :] - a[None, :, :]
    l2 = (d[:, :, 0] * (c - a)[None, :, 1] - d[:, :, 1] * (c - a)[None, :, 0]) / area2
    l3 = (-d[:, :, 0] * (b - a)[None, :, 1] + d[:, :, 1] * (b - a)[None, :, 0]) / area2
    l1 = 1.0 - l2 - l3
    inside = (l1 >= -_GEOM_TOL) & (l2 >= -_GEOM_TOL) & (l3 >= -_GEOM_TOL)

    cell_map = np.full(fine.n_triangles, -1, dtype=np.int64)
    for k in range(fine.n_triangles):
        hits = np.flatnonzero(inside[k])
        if hits.size == 0:
            raise MeshError(f"fine triangle {k} barycenter not inside any coarse cell")
        cell_map[k] = hits[0]
    return cell_map


def write_vtk(path, mesh: Mesh, point_data: dict | None = None,
              cell_data: dict | None = None) -> None:
    """Legacy ASCII VTK unstructured grid (triangle cell type 5).

    point_data values are (nv,) scalars or (nv, 2) vectors sampled at
    vertices; cell_data values are (nt,) scalars.
    """
    nv, nt = mesh.n_vertices, mesh.n_triangles
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("nudge-ns fields\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        if point_data:
            fh.write(f"POINT_DATA {nv}\n")
            for name, vals in point_data.items():
                vals = np.asarray(vals)
                if vals.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in vals:
                        fh.write(f"{v:.17g}\n")
                else:
                    fh.write(f"VECTORS {name} double\n")
                    for v in vals:
                        fh.write(f"{v[0]:.17g} {v[1]:.17g} 0\n")
        if cell_data:
            fh.write(f"CELL_DATA {nt}\n")
            for name, vals in cell_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(vals):
                    fh.write(f"{v:.17g}\n")

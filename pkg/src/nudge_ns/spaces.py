"""Reference elements, quadrature, and dof management.

Element kinds: 'P1' (scalar, vertex dofs), 'P2' (scalar, vertex + edge
midpoint dofs), 'P2v' (vector P2, components interleaved per node),
'P0' (one dof per triangle).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, SIDES

KINDS = ("P0", "P1", "P2", "P2v")


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric rule on the reference triangle, barycentric points."""

    points: np.ndarray   # (nq, 3) barycentric
    weights: np.ndarray  # (nq,), sums to reference area 1/2
    degree: int


def triangle_quadrature(degree: int = 6) -> QuadratureRule:
    """Dunavant rules. Degree 2 (3-point) and degree 6 (12-point)."""
    if degree <= 2:
        pts = np.array([
            [2 / 3, 1 / 6, 1 / 6],
            [1 / 6, 2 / 3, 1 / 6],
            [1 / 6, 1 / 6, 2 / 3],
        ])
        w = np.full(3, 1 / 3)
        deg = 2
    elif degree <= 6:
        groups = [
            (0.873821971016996, 0.063089014491502, 0.050844906370207),
            (0.501426509658179, 0.249286745170910, 0.116786275726379),
        ]
        pts_list, w_list = [], []
        for a, b, w in groups:
            pts_list += [[a, b, b], [b, a, b], [b, b, a]]
            w_list += [w] * 3
        a, b = 0.636502499121399, 0.310352451033785
        c = 1.0 - a - b
        w = 0.082851075618374
        for perm in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]:
            pts_list.append(list(perm))
            w_list.append(w)
        pts = np.array(pts_list)
        w = np.array(w_list)
        deg = 6
    else:
        raise ValueError(f"no quadrature rule of degree {degree} available")
    return QuadratureRule(points=pts, weights=w * 0.5, degree=deg)


def eval_basis(kind: str, bary: np.ndarray):
    """Lagrange basis values and reference gradients at barycentric points.

    Returns (values, grads) with shapes (nq, nloc) and (nq, nloc, 2).
    Gradients are with respect to reference coordinates (x, y) where
    l1 = 1-x-y, l2 = x, l3 = y.  'P2v' shares the scalar P2 basis.
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    l1, l2, l3 = bary[:, 0], bary[:, 1], bary[:, 2]
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # grad of (l1,l2,l3)
    nq = bary.shape[0]
    if kind == "P0":
        return np.ones((nq, 1)), np.zeros((nq, 1, 2))
    if kind == "P1":
        vals = np.stack([l1, l2, l3], axis=1)
        grads = np.broadcast_to(dl, (nq, 3, 2)).copy()
        return vals, grads
    if kind in ("P2", "P2v"):
        ls = [l1, l2, l3]
        vals = np.empty((nq, 6))
        grads = np.empty((nq, 6, 2))
        for i in range(3):
            vals[:, i] = ls[i] * (2 * ls[i] - 1)
            grads[:, i, :] = (4 * ls[i] - 1)[:, None] * dl[i]
        # edge nodes on local edges (0,1), (1,2), (2,0)
        for k, (i, j) in enumerate([(0, 1), (1, 2), (2, 0)]):
            vals[:, 3 + k] = 4 * ls[i] * ls[j]
            grads[:, 3 + k, :] = 4 * (ls[i][:, None] * dl[j] + ls[j][:, None] * dl[i])
        return vals, grads
    raise ValueError(f"unknown element kind {kind!r}")


@dataclass(frozen=True)
class DofMap:
    """Dof layout for one element kind on one mesh.

    cell_nodes: (nt, nloc) scalar node indices per triangle.
    node_coords: (n_nodes, 2) geometric location of each scalar node.
    boundary_nodes: side name -> sorted scalar node indices on that side.
    For 'P2v' the dofs of node k are (2k, 2k+1); n_dofs = 2*n_nodes.
    """

    kind: str
    mesh: Mesh
    cell_nodes: np.ndarray
    node_coords: np.ndarray
    boundary_nodes: dict

    @property
    def components(self) -> int:
        return 2 if self.kind == "P2v" else 1

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.components * self.n_nodes

    def cell_dofs(self) -> np.ndarray:
        """(nt, nloc*components) global dof indices, components interleaved."""
        if self.components == 1:
            return self.cell_nodes
        nt, nloc = self.cell_nodes.shape
        out = np.empty((nt, 2 * nloc), dtype=np.int64)
        out[:, 0::2] = 2 * self.cell_nodes
        out[:, 1::2] = 2 * self.cell_nodes + 1
        return out

    def boundary_dofs(self, sides=None) -> np.ndarray:
        """Global dof indices on the named sides (all sides by default)."""
        sides = SIDES if sides is None else sides
        nodes = sorted({n for s in sides for n in self.boundary_nodes.get(s, [])})
        nodes = np.asarray(nodes, dtype=np.int64)
        if self.components == 1:
            return nodes
        return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))


def build_dofmap(mesh: Mesh, kind: str) -> DofMap:
    if kind not in KINDS:
        raise ValueError(f"unknown element kind {kind!r}")
    if kind == "P0":
        return DofMap(
            kind=kind,
            mesh=mesh,
            cell_nodes=np.arange(mesh.n_triangles, dtype=np.int64)[:, None],
            node_coords=mesh.barycenters(),
            boundary_nodes={},
        )
    if kind == "P1":
        cell_nodes = mesh.triangles.copy()
        coords = mesh.vertices.copy()
        boundary = {s: set() for s in SIDES}
        for ei, side in zip(mesh.boundary_edges, mesh.boundary_markers):
            boundary[side].update(mesh.edges[ei])
        return DofMap(
            kind=kind, mesh=mesh, cell_nodes=cell_nodes, node_coords=coords,
            boundary_nodes={s: sorted(v) for s, v in boundary.items()},
        )
    # P2 / P2v: vertices first, then edge midpoints
    nv = mesh.n_vertices
    edge_index = {tuple(e): nv + i for i, e in enumerate(mesh.edges)}
    nt = mesh.n_triangles
    cell_nodes = np.empty((nt, 6), dtype=np.int64)
    cell_nodes[:, :3] = mesh.triangles
    for k, (i, j, l) in enumerate(mesh.triangles):
        for m, (p, q) in enumerate([(i, j), (j, l), (l, i)]):
            cell_nodes[k, 3 + m] = edge_index[(min(p, q), max(p, q))]
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    coords = np.vstack([mesh.vertices, midpoints])
    boundary = {s: set() for s in SIDES}
    for ei, side in zip(mesh.boundary_edges, mesh.boundary_markers):
        boundary[side].update(mesh.edges[ei])
        boundary[side].add(nv + ei)
    return DofMap(
        kind=kind, mesh=mesh, cell_nodes=cell_nodes, node_coords=coords,
        boundary_nodes={s: sorted(v) for s, v in boundary.items()},
    )


@dataclass
class Field:
    """Coefficient vector bound to a DofMap."""

    dofmap: DofMap
    coeffs: np.ndarray
    t: float | None = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.dofmap.n_dofs,):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} does not match "
                f"dof count {self.dofmap.n_dofs}"
            )

    def copy(self) -> "Field":
        return Field(self.dofmap, self.coeffs.copy(), self.t)

    def vertex_values(self) -> np.ndarray:
        """Values at mesh vertices (for VTK export)."""
        nv = self.dofmap.mesh.n_vertices
        if self.dofmap.components == 1:
            return self.coeffs[:nv]
        return self.coeffs[: 2 * nv].reshape(nv, 2)


def zero_field(dofmap: DofMap, t: float | None = None) -> Field:
    return Field(dofmap, np.zeros(dofmap.n_dofs), t)


def interpolate(mesh: Mesh, dofmap: DofMap, func, t: float = 0.0) -> Field:
    """Nodal interpolant of func(x, y, t).

    For 'P2v' func must return a pair (u1, u2); for scalar kinds a single
    array.  func must accept numpy arrays for x and y.
    """
    x, y = dofmap.node_coords[:, 0], dofmap.node_coords[:, 1]
    vals = func(x, y, t)
    if dofmap.components == 2:
        u1, u2 = vals
        coeffs = np.empty(dofmap.n_dofs)
        coeffs[0::2] = np.broadcast_to(u1, x.shape)
        coeffs[1::2] = np.broadcast_to(u2, x.shape)
    else:
        coeffs = np.broadcast_to(np.asarray(vals, dtype=float), x.shape).copy()
    return Field(dofmap, coeffs, t)


def _geometry(mesh: Mesh):
    """Per-triangle Jacobian data: (detJ, invJT) with detJ = 2*area."""
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    J = np.stack([b - a, c - a], axis=2)  # (nt, 2, 2), columns are edge vectors
    detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJ = np.empty_like(J)
    invJ[:, 0, 0] = J[:, 1, 1]
    invJ[:, 0, 1] = -J[:, 0, 1]
    invJ[:, 1, 0] = -J[:, 1, 0]
    invJ[:, 1, 1] = J[:, 0, 0]
    invJ /= detJ[:, None, None]
    invJT = np.swapaxes(invJ, 1, 2)
    return detJ, invJT


def l2_error(field: Field, exact, quad: QuadratureRule | None = None) -> float:
    """L2 distance between a discrete field and an analytic function.

    exact(x, y, t) follows the interpolate() convention for the field's
    kind; t is taken from the field (0.0 when unset).
    """
    dm = field.dofmap
    mesh = dm.mesh
    quad = triangle_quadrature(6) if quad is None else quad
    vals, _ = eval_basis(dm.kind, quad.points)
    detJ, _ = _geometry(mesh)
    tri = mesh.vertices[mesh.triangles]
    xy = np.einsum("qv,evc->eqc", quad.points, tri)
    t = 0.0 if field.t is None else field.t
    ex = exact(xy[:, :, 0], xy[:, :, 1], t)
    cn = dm.cell_nodes
    errsq = 0.0
    if dm.components == 1:
        uq = np.einsum("ei,qi->eq", field.coeffs[cn], vals)
        errsq = np.einsum("q,eq,e->", quad.weights, (uq - ex) ** 2, detJ)
    else:
        for c in range(2):
            uq = np.einsum("ei,qi->eq", field.coeffs[2 * cn + c], vals)
            errsq += np.einsum("q,eq,e->", quad.weights, (uq - ex[c]) ** 2, detJ)
    return float(np.sqrt(errsq))


def norms(field: Field, mesh: Mesh | None = None,
          quad: QuadratureRule | None = None) -> tuple[float, float]:
    """(L2 norm, H1 seminorm) by quadrature; exact for polynomial fields."""
    dm = field.dofmap
    mesh = dm.mesh if mesh is None else mesh
    quad = triangle_quadrature(6) if quad is None else quad
    vals, grads = eval_basis(dm.kind, quad.points)
    detJ, invJT = _geometry(mesh)
    # physical gradients: (nt, nq, nloc, 2)
    gphys = np.einsum("eab,qib->eqia", invJT, grads)
    cn = dm.cell_nodes
    l2sq = 0.0
    h1sq = 0.0
    if dm.components == 1:
        u = field.coeffs[cn]  # (nt, nloc)
        uq = np.einsum("ei,qi->eq", u, vals)
        gq = np.einsum("ei,eqia->eqa", u, gphys)
        l2sq = np.einsum("q,eq,e->", quad.weights, uq ** 2, detJ)
        h1sq = np.einsum("q,eqa,e->", quad.weights, gq ** 2, detJ)
    else:
        for c in range(2):
            u = field.coeffs[2 * cn + c]
            uq = np.einsum("ei,qi->eq", u, vals)
            gq = np.einsum("ei,eqia->eqa", u, gphys)
            l2sq += np.einsum("q,eq,e->", quad.weights, uq ** 2, detJ)
            h1sq += np.einsum("q,eqa,e->", quad.weights, gq ** 2, detJ)
    return float(np.sqrt(l2sq)), float(np.sqrt(h1sq))

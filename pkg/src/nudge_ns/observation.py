"""Coarse-mesh observation operator and nudging form.

I_H is the orthogonal L2 projection of the fine velocity onto functions
that are constant on each coarse aggregate (the union of fine triangles
mapped to one coarse cell; for nested meshes this is the coarse cell
itself).  Observation snapshots travel as CSV files with the header
``t,cell_id,ubar_x,ubar_y``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, build_cell_map, build_unit_square_mesh
from .spaces import DofMap, Field, build_dofmap, eval_basis, triangle_quadrature, _geometry


@dataclass(frozen=True)
class ObservationOperator:
    """Restriction of fine velocity fields to coarse per-cell means."""

    coarse_mesh: Mesh
    coarse_dofmap: DofMap          # P0 on the coarse mesh
    fine_dofmap: DofMap            # P2v on the fine mesh
    restriction: sp.csr_matrix     # scalar: (n_coarse_cells, n_fine_nodes)
    cell_areas: np.ndarray         # aggregate (mapped) area per coarse cell
    cell_map: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.coarse_mesh.n_triangles

    @property
    def H(self) -> float:
        """Characteristic coarse mesh width (longest edge)."""
        e = self.coarse_mesh.edges
        v = self.coarse_mesh.vertices
        return float(np.max(np.linalg.norm(v[e[:, 0]] - v[e[:, 1]], axis=1)))


def build_observation(fine_mesh: Mesh, fine_dofmap: DofMap, coarse_n: int) -> ObservationOperator:
    """Build I_H onto a structured coarse mesh of width 1/coarse_n."""
    if fine_dofmap.kind != "P2v":
        raise ValueError("observation operator acts on the P2 vector velocity")
    fine_n = int(round(np.sqrt(fine_mesh.n_triangles / 2)))
    if coarse_n > fine_n:
        raise ValueError(f"coarse mesh (n={coarse_n}) finer than fine mesh (n={fine_n})")
    coarse_mesh = build_unit_square_mesh(coarse_n)
    coarse_dofmap = build_dofmap(coarse_mesh, "P0")
    cell_map = build_cell_map(fine_mesh, coarse_mesh)

    quad = triangle_quadrature(6)
    detJ, _ = _geometry(fine_mesh)
    vals, _ = eval_basis("P2", quad.points)
    # integral of each scalar basis function over each fine triangle
    loc = np.einsum("q,qi,e->ei", quad.weights, vals, detJ)  # (nt, 6)
    nt, nloc = loc.shape
    rows = np.repeat(cell_map, nloc)
    cols = fine_dofmap.cell_nodes.ravel()
    P = sp.coo_matrix((loc.ravel(), (rows, cols)),
                      shape=(coarse_mesh.n_triangles, fine_dofmap.n_nodes)).tocsr()
    areas = np.zeros(coarse_mesh.n_triangles)
    np.add.at(areas, cell_map, 0.5 * detJ)
    if np.any(areas <= 0):
        raise ValueError("coarse cell received no fine triangles")
    P = sp.diags(1.0 / areas) @ P  # rows now compute cell means
    return ObservationOperator(
        coarse_mesh=coarse_mesh,
        coarse_dofmap=coarse_dofmap,
        fine_dofmap=fine_dofmap,
        restriction=P.tocsr(),
        cell_areas=areas,
        cell_map=cell_map,
    )


def apply_IH(op: ObservationOperator, v: Field) -> np.ndarray:
    """Per-coarse-cell L2 means of a fine velocity field, shape (nc, 2)."""
    if v.dofmap is not op.fine_dofmap and v.dofmap.n_dofs != op.fine_dofmap.n_dofs:
        raise ValueError("field does not live on the observed velocity space")
    out = np.empty((op.n_cells, 2))
    out[:, 0] = op.restriction @ v.coeffs[0::2]
    out[:, 1] = op.restriction @ v.coeffs[1::2]
    return out


def coarse_norm(op: ObservationOperator, values: np.ndarray) -> float:
    """L2 norm of a piecewise-constant coarse field given per-cell values."""
    return float(np.sqrt(np.sum(op.cell_areas[:, None] * np.asarray(values) ** 2)))


def assemble_nudging(op: ObservationOperator, chi: float):
    """Nudging operator G = chi * P^T M_H P and the data-to-load map.

    Returns (G, to_load) where G acts on fine velocity coefficients and
    to_load(coarse_values) gives the right-hand-side contribution
    chi * P^T M_H * coarse_values for observed coarse means of u.
    """
    if chi < 0:
        raise ValueError(f"nudging parameter must be nonnegative, got {chi}")
    PtMH = (op.restriction.T @ sp.diags(op.cell_areas)).tocsr()  # scalar block
    Gs = (chi * (PtMH @ op.restriction)).tocsr()
    G = sp.kron(Gs, sp.identity(2, format="csr")).tocsr()

    def to_load(coarse_values: np.ndarray) -> np.ndarray:
        coarse_values = np.asarray(coarse_values, dtype=float)
        out = np.empty(op.fine_dofmap.n_dofs)
        out[0::2] = chi * (PtMH @ coarse_values[:, 0])
        out[1::2] = chi * (PtMH @ coarse_values[:, 1])
        return out

    return G, to_load


def estimate_C1H(op: ObservationOperator, fine_mesh: Mesh) -> float:
    """Empirical sup of ||phi - I_H phi|| / ||grad phi|| over trig probes.

    Probes are (sin(k pi x) sin(m pi y), 0) for k, m <= 4; the bound is
    the C1*H constant of the coarse-projection approximation estimate.
    """
    from .spaces import interpolate, norms

    best = 0.0
    for k in range(1, 5):
        for m in range(1, 5):
            def probe(x, y, t, k=k, m=m):
                return np.sin(k * np.pi * x) * np.sin(m * np.pi * y), np.zeros_like(x)

            phi = interpolate(fine_mesh, op.fine_dofmap, probe)
            l2, h1 = norms(phi)
            ih = apply_IH(op, phi)
            # orthogonal projection: ||phi - I_H phi||^2 = ||phi||^2 - ||I_H phi||^2
            errsq = max(l2 ** 2 - coarse_norm(op, ih) ** 2, 0.0)
            best = max(best, np.sqrt(errsq) / h1)
    return best


def write_observations(path, times, values) -> None:
    """Write snapshots: times (ns,), values (ns, nc, 2)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cell_id", "ubar_x", "ubar_y"])
        for t, snap in zip(times, values):
            for cid, (ux, uy) in enumerate(snap):
                w.writerow([f"{t:.17g}", cid, f"{ux:.17g}", f"{uy:.17g}"])


def read_observations(path):
    """Read a snapshot CSV back into (times, values)."""
    by_t: dict[float, dict[int, tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            by_t.setdefault(t, {})[int(row["cell_id"])] = (
                float(row["ubar_x"]), float(row["ubar_y"]))
    times = np.array(sorted(by_t))
    nc = max(len(v) for v in by_t.values())
    values = np.empty((times.size, nc, 2))
    for i, t in enumerate(times):
        for cid, uv in by_t[t].items():
            values[i, cid] = uv
    return times, values


class ObservationSeries:
    """Time series of coarse means with linear interpolation in time.

    Queries before the first sample return the first snapshot, queries
    after the last return the last (steady-state hold).
    """

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.values.shape[0] != self.times.size:
            raise ValueError("times and values do not align")

    @classmethod
    def from_csv(cls, path) -> "ObservationSeries":
        return cls(*read_observations(path))

    def __call__(self, t: float) -> np.ndarray:
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        i = int(np.searchsorted(ts, t)) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1 - w) * self.values[i] + w * self.values[i + 1]

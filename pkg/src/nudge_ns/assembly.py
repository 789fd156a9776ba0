"""Assembly of the weak-form operators.

All operators are returned as scipy.sparse CSR matrices; duplicate
(row, col) contributions accumulate during COO -> CSR conversion.
Vector operators use interleaved component ordering and are built from
scalar blocks via Kronecker products, so symmetric forms are assembled
exactly symmetric and skew forms exactly antisymmetric.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .spaces import DofMap, Field, QuadratureRule, _geometry, eval_basis, triangle_quadrature

_ROT = sp.csr_matrix(np.array([[0.0, -1.0], [1.0, 0.0]]))
_I2 = sp.identity(2, format="csr")


def _quad(quad):
    return triangle_quadrature(6) if quad is None else quad


def _scalar_setup(dofmap: DofMap, quad: QuadratureRule):
    """Geometry and basis data shared by the element loops."""
    detJ, invJT = _geometry(dofmap.mesh)
    vals, grads = eval_basis("P2" if dofmap.kind == "P2v" else dofmap.kind, quad.points)
    gphys = np.einsum("eab,qib->eqia", invJT, grads)
    return detJ, vals, gphys


def _to_csr(local: np.ndarray, rows: np.ndarray, cols: np.ndarray,
            shape: tuple[int, int]) -> sp.csr_matrix:
    """Accumulate (nt, ni, nj) local matrices into a global CSR matrix."""
    nt, ni, nj = local.shape
    r = np.repeat(rows, nj, axis=1).ravel()
    c = np.tile(cols, (1, ni)).ravel()
    mat = sp.coo_matrix((local.ravel(), (r, c)), shape=shape)
    return mat.tocsr()


def _scalar_mass(dofmap: DofMap, quad=None, coeff=None) -> sp.csr_matrix:
    quad = _quad(quad)
    detJ, vals, _ = _scalar_setup(dofmap, quad)
    if coeff is None:
        ref = np.einsum("q,qi,qj->ij", quad.weights, vals, vals)
        local = detJ[:, None, None] * ref[None, :, :]
    else:
        xy = quad_point_coords(dofmap.mesh, quad)
        cq = np.asarray(coeff(xy[:, :, 0], xy[:, :, 1]), dtype=float)
        cq = np.broadcast_to(cq, detJ.shape + (quad.weights.size,))
        local = np.einsum("q,eq,qi,qj,e->eij", quad.weights, cq, vals, vals, detJ)
        local = 0.5 * (local + np.swapaxes(local, 1, 2))
    n = dofmap.n_nodes
    return _to_csr(local, dofmap.cell_nodes, dofmap.cell_nodes, (n, n))


def _scalar_stiffness(dofmap: DofMap, quad=None) -> sp.csr_matrix:
    quad = _quad(quad)
    detJ, _, gphys = _scalar_setup(dofmap, quad)
    local = np.einsum("q,eqia,eqja,e->eij", quad.weights, gphys, gphys, detJ)
    local = 0.5 * (local + np.swapaxes(local, 1, 2))  # enforce exact symmetry
    n = dofmap.n_nodes
    return _to_csr(local, dofmap.cell_nodes, dofmap.cell_nodes, (n, n))


def assemble_mass(dofmap: DofMap, quad=None) -> sp.csr_matrix:
    """L2 inner-product matrix; kron-expanded per component for 'P2v'."""
    Ms = _scalar_mass(dofmap, quad)
    return sp.kron(Ms, _I2).tocsr() if dofmap.components == 2 else Ms


def assemble_stiffness(dofmap: DofMap, nu: float = 1.0, quad=None) -> sp.csr_matrix:
    """nu * (grad u, grad v)."""
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    Ks = _scalar_stiffness(dofmap, quad)
    K = sp.kron(Ks, _I2).tocsr() if dofmap.components == 2 else Ks
    return (nu * K).tocsr()


def assemble_divergence(vel_dofmap: DofMap, pres_dofmap: DofMap,
                        quad=None) -> sp.csr_matrix:
    """B with (B v)[q] = (div v, psi_q).  Shape (n_pres, n_vel)."""
    quad = _quad(quad)
    detJ, _, gphys = _scalar_setup(vel_dofmap, quad)
    pvals, _ = eval_basis(pres_dofmap.kind, quad.points)
    # local[e, j, i, c] = int psi_j * d(phi_i)/dx_c
    local = np.einsum("q,qj,eqic,e->ejic", quad.weights, pvals, gphys, detJ)
    nt, nj, ni, _ = local.shape
    local = local.reshape(nt, nj, 2 * ni)
    return _to_csr(local, pres_dofmap.cell_nodes, vel_dofmap.cell_dofs(),
                   (pres_dofmap.n_dofs, vel_dofmap.n_dofs))


def _skew_advection_block(advecting: Field, dofmap: DofMap, quad) -> sp.csr_matrix:
    """Scalar block of b*(a, ., .) = 1/2 (a.grad v, w) - 1/2 (a.grad w, v)."""
    quad = _quad(quad)
    detJ, vals, gphys = _scalar_setup(dofmap, quad)
    cn = dofmap.cell_nodes
    adm = advecting.dofmap
    if adm.kind != "P2v":
        raise ValueError("advecting field must live on the P2 vector space")
    acn = adm.cell_nodes
    aq = np.stack(
        [np.einsum("ei,qi->eq", advecting.coeffs[2 * acn + c], vals) for c in (0, 1)],
        axis=2,
    )  # (nt, nq, 2)
    d = np.einsum("eqc,eqic->eqi", aq, gphys)  # (a . grad phi_i) at quad pts
    n1 = np.einsum("q,qi,eqj,e->eij", quad.weights, vals, d, detJ)
    local = 0.5 * (n1 - np.swapaxes(n1, 1, 2))
    n = dofmap.n_nodes
    return _to_csr(local, cn, cn, (n, n))


def assemble_convection(advecting: Field, vel_dofmap: DofMap, quad=None) -> sp.csr_matrix:
    """N(a) with w^T N(a) v = b*(a, v, w); antisymmetric by construction."""
    block = _skew_advection_block(advecting, vel_dofmap, quad)
    return sp.kron(block, _I2).tocsr()


def assemble_scalar_advection(advecting: Field, dofmap: DofMap, quad=None) -> sp.csr_matrix:
    """Skew-symmetrized advection of a scalar (temperature) by a velocity."""
    return _skew_advection_block(advecting, dofmap, quad)


def assemble_coriolis(vel_dofmap: DofMap, quad=None, coeff=None) -> sp.csr_matrix:
    """C with w^T C v = (beta R(v), w), R(v) = (-v2, v1).

    coeff is an optional scalar field beta(x, y) (variable rotation
    rate); None means beta = 1.  Exactly antisymmetric either way.
    """
    if vel_dofmap.components != 2:
        raise ValueError("Coriolis operator needs a vector space")
    Ms = _scalar_mass(vel_dofmap, quad, coeff=coeff)
    return sp.kron(Ms, _ROT).tocsr()


def quad_point_coords(mesh: Mesh, quad: QuadratureRule) -> np.ndarray:
    """Physical coordinates of the quadrature points, shape (nt, nq, 2)."""
    tri = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    return np.einsum("qv,evc->eqc", quad.points, tri)


def assemble_forcing(f, t: float, dofmap: DofMap, quad=None) -> np.ndarray:
    """Load vector (f(., t), w) by quadrature.

    f(x, y, t) returns a pair of arrays for vector spaces, one array for
    scalar spaces.
    """
    quad = _quad(quad)
    detJ, vals, _ = _scalar_setup(dofmap, quad)
    xy = quad_point_coords(dofmap.mesh, quad)
    fv = f(xy[:, :, 0], xy[:, :, 1], t)
    out = np.zeros(dofmap.n_dofs)
    cn = dofmap.cell_nodes
    if dofmap.components == 2:
        for c in (0, 1):
            comp = np.broadcast_to(np.asarray(fv[c], dtype=float), detJ.shape + (quad.weights.size,))
            loc = np.einsum("q,eq,qi,e->ei", quad.weights, comp, vals, detJ)
            np.add.at(out, 2 * cn + c, loc)
    else:
        comp = np.broadcast_to(np.asarray(fv, dtype=float), detJ.shape + (quad.weights.size,))
        loc = np.einsum("q,eq,qi,e->ei", quad.weights, comp, vals, detJ)
        np.add.at(out, cn, loc)
    return out


def assemble_curl_load(vel: Field, target: DofMap, quad=None) -> np.ndarray:
    """Load vector (curl w, phi) = (dw2/dx - dw1/dy, phi) on a scalar space."""
    quad = _quad(quad)
    detJ, _, gphys_v = _scalar_setup(vel.dofmap, quad)
    tvals, _ = eval_basis(target.kind, quad.points)
    cn = vel.dofmap.cell_nodes
    w1 = vel.coeffs[2 * cn]
    w2 = vel.coeffs[2 * cn + 1]
    curl = (np.einsum("ei,eqi->eq", w2, gphys_v[:, :, :, 0])
            - np.einsum("ei,eqi->eq", w1, gphys_v[:, :, :, 1]))
    loc = np.einsum("q,eq,qi,e->ei", quad.weights, curl, tvals, detJ)
    out = np.zeros(target.n_dofs)
    np.add.at(out, target.cell_nodes, loc)
    return out


def assemble_buoyancy(T_field: Field, Pr: float, Ra: float,
                      gravity_dir, vel_dofmap: DofMap, quad=None) -> np.ndarray:
    """Load vector (Pr Ra T g, w) for velocity test functions.

    Temperature and velocity share the scalar P2 node set, so the load is
    Pr*Ra*g_c * (M_s T) per component, which is quadrature exact.
    """
    if T_field.dofmap.kind != "P2" or vel_dofmap.kind != "P2v":
        raise ValueError("buoyancy expects P2 temperature and P2v velocity")
    g = np.asarray(gravity_dir, dtype=float)
    MsT = _scalar_mass(vel_dofmap, quad) @ T_field.coeffs
    out = np.empty(vel_dofmap.n_dofs)
    out[0::2] = Pr * Ra * g[0] * MsT
    out[1::2] = Pr * Ra * g[1] * MsT
    return out

"""Sparse direct solves with symmetric Dirichlet elimination.

Each step of the time loop produces one LinearSystem; constrained dofs
are eliminated symmetrically and the reduced system is factorized with
a sparse LU.  Every solve checks its relative residual so long runs
cannot drift silently.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-10


class SolveError(RuntimeError):
    pass


@dataclass
class LinearSystem:
    A: sp.csr_matrix
    b: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))


def apply_dirichlet(system: LinearSystem, dofs, values) -> LinearSystem:
    """Attach Dirichlet constraints; conflicting duplicates are rejected."""
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    alld = np.concatenate([system.constrained, dofs])
    allv = np.concatenate([system.values, values])
    order = np.argsort(alld, kind="stable")
    alld, allv = alld[order], allv[order]
    dup = alld[1:] == alld[:-1]
    if np.any(dup & (np.abs(allv[1:] - allv[:-1]) > 1e-14)):
        bad = alld[1:][dup & (np.abs(allv[1:] - allv[:-1]) > 1e-14)]
        raise ValueError(f"conflicting Dirichlet values at dofs {bad[:5]}")
    keep = np.concatenate([[True], ~dup])
    return LinearSystem(system.A, system.b, alld[keep], allv[keep])


def solve(system: LinearSystem, context: str = "") -> np.ndarray:
    """Direct solve after constraint elimination; returns the full vector."""
    n = system.A.shape[0]
    x = np.zeros(n)
    x[system.constrained] = system.values
    free = np.setdiff1d(np.arange(n), system.constrained, assume_unique=False)
    if free.size == 0:
        return x
    A = system.A.tocsr()
    rhs = system.b - A @ x if system.constrained.size else system.b.copy()
    Aff = A[free][:, free].tocsc()
    bf = rhs[free]
    try:
        lu = spla.splu(Aff)
        xf = lu.solve(bf)
    except RuntimeError as exc:
        raise SolveError(f"singular factorization ({context})") from exc
    if not np.all(np.isfinite(xf)):
        raise SolveError(f"non-finite solution ({context})")
    scale = max(np.linalg.norm(bf), 1e-300)
    rel = np.linalg.norm(Aff @ xf - bf) / scale
    if rel > RESIDUAL_TOL:
        raise SolveError(f"relative residual {rel:.3e} exceeds {RESIDUAL_TOL:g} ({context})")
    x[free] = xf
    return x


def reactions(system: LinearSystem, x: np.ndarray) -> np.ndarray:
    """Residual A x - b at the constrained rows (boundary reactions)."""
    r = system.A @ x - system.b
    out = np.zeros_like(r)
    out[system.constrained] = r[system.constrained]
    return out

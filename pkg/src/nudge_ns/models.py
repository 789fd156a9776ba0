"""Problem definitions: equations, parameters, and analytic data.

A ModelSpec binds one of four flow problems to its parameters.  The
rotation term R(u) = (-u2, u1) appears only in the DNS kinds; nudged
kinds omit it and carry the nudging coupling instead.  This asymmetry
is exactly the model error the assimilation is meant to correct.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = (
    "nse-dns",          # Navier-Stokes with the rotation term (data generator)
    "nse-nudged",       # Navier-Stokes without rotation, nudged toward data
    "boussinesq-dns",   # natural convection with rotation
    "boussinesq-nudged",
)


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    nu: float = 1.0            # viscosity (NSE kinds); Pr plays this role otherwise
    omega: float = 0.0         # scale of the rotation term (DNS kinds only)
    chi: float = 0.0           # nudging parameter (nudged kinds only)
    Pr: float = 0.71
    Ra: float = 1.0e4
    gravity: tuple = (0.0, 1.0)
    boundary: str = "cavity"   # 'cavity' (no-slip) or 'manufactured' (exact trace)
    rotation_coeff: object = None  # beta(x, y) scaling R(u); None = constant 1
    forcing: object = None     # f(x, y, t) -> (f1, f2), or None for zero
    heat_source: object = None  # gamma(x, y, t), or None for zero
    t_final: float = 1.0
    dt: float = 1e-3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind.startswith("nse") and self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.kind.startswith("boussinesq") and (self.Pr <= 0 or self.Ra < 0):
            raise ValueError("Pr must be positive and Ra nonnegative")
        if self.omega < 0 or self.chi < 0:
            raise ValueError("omega and chi must be nonnegative")
        if self.t_final <= 0 or self.dt <= 0:
            raise ValueError("t_final and dt must be positive")

    @property
    def is_nudged(self) -> bool:
        return self.kind.endswith("nudged")

    @property
    def is_boussinesq(self) -> bool:
        return self.kind.startswith("boussinesq")

    @property
    def viscosity(self) -> float:
        return self.Pr if self.is_boussinesq else self.nu


class ManufacturedSolution:
    """Divergence-free test solution u = e^t (cos y, sin x), p = (x-y)(1+t)."""

    def velocity(self, x, y, t):
        et = np.exp(t)
        return et * np.cos(y), et * np.sin(x)

    def pressure(self, x, y, t):
        return (x - y) * (1.0 + t)

    def velocity_field(self, x, y, t):
        # signature matching spaces.interpolate
        return self.velocity(x, y, t)

    def divergence(self, x, y, t):
        # d/dx (e^t cos y) + d/dy (e^t sin x) = 0 identically
        return np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float))

    def strong_residual(self, f, nu, omega, x, y, t, include_coriolis=True):
        """Pointwise residual of the momentum equation with forcing f."""
        fx, fy = self.forcing_terms(nu, omega, x, y, t, include_coriolis)
        gx, gy = f(x, y, t)
        return fx - gx, fy - gy

    def forcing_terms(self, nu, omega, x, y, t, include_coriolis=True):
        et = np.exp(t)
        u1 = et * np.cos(y)
        u2 = et * np.sin(x)
        # u_t + u.grad u - nu*lap(u) + grad p [+ omega R(u)]
        f1 = u1 + u2 * (-et * np.sin(y)) + nu * u1 + (1.0 + t)
        f2 = u2 + u1 * (et * np.cos(x)) + nu * u2 - (1.0 + t)
        if include_coriolis:
            f1 = f1 + omega * (-u2)
            f2 = f2 + omega * u1
        return f1, f2


def manufactured_forcing(ms: ManufacturedSolution, nu: float, omega: float,
                         include_coriolis: bool = True):
    """Body force making the manufactured pair solve the momentum equation."""

    def f(x, y, t):
        return ms.forcing_terms(nu, omega, x, y, t, include_coriolis)

    return f


def boundary_values(spec: str, side: str, t: float, x, y):
    """Dirichlet data on one side.

    spec 'cavity': velocity (0, 0); temperature 1 at the left (hot) wall,
    0 at the right, None (natural/adiabatic) at top and bottom.
    spec 'manufactured': exact velocity trace; temperature unused.
    """
    if side not in ("left", "right", "bottom", "top"):
        raise ValueError(f"unknown side {side!r}")
    if spec == "cavity":
        vel = (np.zeros_like(x), np.zeros_like(y))
        temp = {"left": 1.0, "right": 0.0}.get(side)
        return vel, temp
    if spec == "manufactured":
        return ManufacturedSolution().velocity(x, y, t), None
    raise ValueError(f"unknown boundary spec {spec!r}")

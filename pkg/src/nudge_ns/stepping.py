"""Time integrators.

CnleSolver advances the NSE / nudged-NSE with the linearly implicit
Crank-Nicolson scheme: the unknown is the midpoint velocity, the
convecting field is the extrapolant (3 v_n - v_{n-1}) / 2, and the
divergence constraint is imposed at the midpoint.  BoussinesqSolver
advances the coupled temperature/momentum system with BDF2 and linear
extrapolation, temperature solved first.

Both record an EnergyLedger row per step.  The energy residual is the
algebraic energy identity (the discrete equation tested with the
solution itself, boundary reactions accounted for) and must stay at
solver-tolerance scale on every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .linsolve import LinearSystem, apply_dirichlet, reactions, solve
from .mesh import Mesh
from .models import ManufacturedSolution, ModelSpec
from .observation import (ObservationOperator, apply_IH, assemble_nudging,
                          build_observation, coarse_norm)
from .spaces import DofMap, Field, build_dofmap, interpolate, zero_field


@dataclass
class FlowState:
    velocity: Field
    pressure: Field
    t: float
    temperature: Field | None = None
    prev_velocity: Field | None = None
    prev_temperature: Field | None = None


@dataclass
class EnergyLedger:
    """Per-step diagnostics of the discrete energy balance."""

    rows: list = field(default_factory=list)

    COLUMNS = ("step", "t", "kinetic", "dissipation", "nudge_energy",
               "misfit", "work", "energy_residual", "div_residual", "err_L2")

    def append(self, **row):
        self.rows.append(row)

    def column(self, name) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows])

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(
                    f"{r.get(c, float('nan')):.17g}" if c != "step" else str(r["step"])
                    for c in self.COLUMNS) + "\n")


def _mean_zero(pressure: np.ndarray, mp_row_sums: np.ndarray) -> np.ndarray:
    return pressure - (mp_row_sums @ pressure)  # |Omega| = 1


class _SaddleSolverBase:
    """Shared operators for the velocity/pressure saddle systems."""

    def __init__(self, mesh: Mesh, model: ModelSpec, coarse_n: int = 8,
                 obs=None, reference=None):
        self.mesh = mesh
        self.model = model
        self.obs = obs
        self.reference = reference
        self.vel_dm = build_dofmap(mesh, "P2v")
        self.pres_dm = build_dofmap(mesh, "P1")
        self.M = assembly.assemble_mass(self.vel_dm)
        self.K = assembly.assemble_stiffness(self.vel_dm, 1.0)
        self.B = assembly.assemble_divergence(self.vel_dm, self.pres_dm)
        self.Bt = self.B.T.tocsr()
        self.mp_row_sums = np.asarray(
            assembly.assemble_mass(self.pres_dm).sum(axis=0)).ravel()
        self.C = (assembly.assemble_coriolis(self.vel_dm, coeff=model.rotation_coeff)
                  if model.omega > 0 else None)
        self.obs_op: ObservationOperator | None = None
        self.G = None
        self.to_load = None
        if model.is_nudged:
            self.obs_op = build_observation(mesh, self.vel_dm, coarse_n)
            self.G, self.to_load = assemble_nudging(self.obs_op, model.chi)
        self.nvel = self.vel_dm.n_dofs
        self.npres = self.pres_dm.n_dofs
        self.vel_bdofs = self.vel_dm.boundary_dofs()
        self._Kff_lu = None
        self._free_vel = np.setdiff1d(np.arange(self.nvel), self.vel_bdofs)
        self.ledger = EnergyLedger()
        self._step_count = 0
        self.grad_v_max = 0.0

    def _boundary_velocity(self, t: float) -> np.ndarray:
        if self.model.boundary == "cavity":
            return np.zeros(self.vel_bdofs.size)
        ms = ManufacturedSolution()
        nodes = self.vel_bdofs // 2
        comp = self.vel_bdofs % 2
        xy = self.vel_dm.node_coords[nodes]
        u1, u2 = ms.velocity(xy[:, 0], xy[:, 1], t)
        return np.where(comp == 0, u1, u2)

    def dual_norm_sq(self, fvec: np.ndarray) -> float:
        """Discrete H^-1 norm squared: f^T K_ff^{-1} f on the no-slip space."""
        if self._Kff_lu is None:
            Kff = self.K[self._free_vel][:, self._free_vel].tocsc()
            self._Kff_lu = spla.splu(Kff)
        ff = fvec[self._free_vel]
        return float(ff @ self._Kff_lu.solve(ff))

    def _solve_saddle(self, A_vv, rhs_v, bc_values, context):
        A = sp.bmat([[A_vv, self.Bt], [self.B, None]], format="csr")
        b = np.concatenate([rhs_v, np.zeros(self.npres)])
        system = LinearSystem(A, b)
        system = apply_dirichlet(system, self.vel_bdofs, bc_values)
        system = apply_dirichlet(system, [self.nvel], [0.0])  # pressure gauge pin
        x = solve(system, context)
        react = reactions(system, x)
        return x, react

    def _div_residual(self, v: np.ndarray) -> float:
        # the pinned pressure row tests div against a basis function whose
        # constraint is fixed by the boundary data, so it is excluded
        r = self.B @ v
        return float(np.max(np.abs(r[1:]))) if r.size > 1 else float(abs(r[0]))

    def _err_L2(self, vel: Field, t: float) -> float:
        if self.reference is None:
            return float("nan")
        from .spaces import l2_error
        return l2_error(vel, lambda x, y, tt: self.reference(x, y, t))


class CnleSolver(_SaddleSolverBase):
    """Linearly implicit Crank-Nicolson for NSE with rotation or nudging."""

    def __init__(self, mesh, model: ModelSpec, coarse_n: int = 8,
                 obs=None, reference=None, track_stability=False):
        if model.is_boussinesq:
            raise ValueError("CnleSolver handles the NSE kinds only")
        super().__init__(mesh, model, coarse_n, obs, reference)
        self.track_stability = track_stability

    def initial_state(self, v0) -> FlowState:
        if callable(v0):
            vel = interpolate(self.mesh, self.vel_dm, v0, 0.0)
        else:
            vel = v0.copy()
        vel.t = 0.0
        return FlowState(velocity=vel, pressure=zero_field(self.pres_dm, 0.0), t=0.0)

    def step(self, state: FlowState, dt: float) -> FlowState:
        if dt <= 0:
            raise ValueError("dt must be positive")
        model = self.model
        t_mid = state.t + 0.5 * dt
        vn = state.velocity.coeffs
        if state.prev_velocity is None:
            vtilde = state.velocity  # first-order bootstrap
        else:
            vtilde = Field(self.vel_dm, 1.5 * vn - 0.5 * state.prev_velocity.coeffs)
        N = assembly.assemble_convection(vtilde, self.vel_dm)
        A_vv = (2.0 / dt) * self.M + N + model.nu * self.K
        if not model.is_nudged and self.C is not None:
            A_vv = A_vv + model.omega * self.C
        if model.is_nudged:
            A_vv = A_vv + self.G

        rhs = (2.0 / dt) * (self.M @ vn)
        fvec = np.zeros(self.nvel)
        if model.forcing is not None:
            fvec = assembly.assemble_forcing(model.forcing, t_mid, self.vel_dm)
            rhs = rhs + fvec
        ubar = None
        if model.is_nudged:
            if self.obs is None:
                raise ValueError("nudged model requires an observation source")
            ubar = np.asarray(self.obs(t_mid))
            rhs = rhs + self.to_load(ubar)

        # constrain the midpoint so the endpoint trace is exact:
        # v_{n+1}|_G = 2 v_mid|_G - v_n|_G = g(t_{n+1})
        bc_mid = 0.5 * (vn[self.vel_bdofs] + self._boundary_velocity(state.t + dt))
        x, react = self._solve_saddle(
            A_vv, rhs, bc_mid, f"cnle step {self._step_count} t={state.t:.6g}")
        v_mid = x[:self.nvel]
        lam = _mean_zero(x[self.nvel:], self.mp_row_sums)
        v_new = 2.0 * v_mid - vn
        if not np.all(np.isfinite(v_new)):
            raise FloatingPointError(f"NaN at cnle step {self._step_count}")

        self._record(state, v_new, v_mid, lam, dt, t_mid, fvec, ubar, react, x)
        new_vel = Field(self.vel_dm, v_new, state.t + dt)
        return FlowState(
            velocity=new_vel,
            pressure=Field(self.pres_dm, lam, t_mid),
            t=state.t + dt,
            prev_velocity=state.velocity,
        )

    def _record(self, state, v_new, v_mid, lam, dt, t_mid, fvec, ubar, react, x):
        model = self.model
        kin_new = float(v_new @ (self.M @ v_new))
        kin_old = float(state.velocity.coeffs @ (self.M @ state.velocity.coeffs))
        grad_sq = float(v_mid @ (self.K @ v_mid))
        self.grad_v_max = max(self.grad_v_max, np.sqrt(grad_sq))
        dissip = model.nu * grad_sq
        cor = float(v_mid @ (self.C @ v_mid)) if (self.C is not None and not model.is_nudged) else 0.0
        work = float(fvec @ v_mid)
        nudge_energy = misfit = nudge_pair = data_nsq = 0.0
        if model.is_nudged:
            vm_field = Field(self.vel_dm, v_mid)
            ih_v = apply_IH(self.obs_op, vm_field)
            nudge_energy = model.chi * coarse_norm(self.obs_op, ih_v) ** 2
            misfit = model.chi * coarse_norm(self.obs_op, ubar - ih_v) ** 2
            data_nsq = model.chi * coarse_norm(self.obs_op, ubar) ** 2
            nudge_pair = float(v_mid @ (self.G @ v_mid) - v_mid @ self.to_load(ubar))
        pres = float(lam @ (self.B @ v_mid))
        bnd_work = float(v_mid @ react[:self.nvel]) + float(x[self.nvel] * react[self.nvel])
        residual = (0.5 * (kin_new - kin_old)
                    + dt * (dissip + model.omega * cor + nudge_pair + pres - work)
                    - dt * bnd_work)
        row = dict(
            step=self._step_count, t=state.t + dt,
            kinetic=kin_new, dissipation=dissip,
            nudge_energy=nudge_energy, misfit=misfit, work=work,
            energy_residual=residual,
            div_residual=self._div_residual(v_mid),
            err_L2=self._err_L2(Field(self.vel_dm, v_new), state.t + dt),
            kinetic_prev=kin_old, data_norm_sq=data_nsq, dt=dt,
        )
        if self.track_stability:
            row["force_dual_sq"] = self.dual_norm_sq(fvec)
        self.ledger.append(**row)
        self._step_count += 1

    def run(self, state: FlowState, t_final: float, dt: float,
            callback=None) -> FlowState:
        n_steps = int(round(t_final / dt))
        for _ in range(n_steps):
            state = self.step(state, dt)
            if callback is not None:
                callback(state)
        return state


class BoussinesqSolver(_SaddleSolverBase):
    """BDF2 with linear extrapolation for the natural-convection system.

    Each step solves temperature first (advected by the extrapolated
    velocity), then momentum with the fresh temperature in the buoyancy
    term.  The first step is one backward-Euler step.
    """

    def __init__(self, mesh, model: ModelSpec, coarse_n: int = 8,
                 obs=None, reference=None):
        if not model.is_boussinesq:
            raise ValueError("BoussinesqSolver handles the Boussinesq kinds only")
        super().__init__(mesh, model, coarse_n, obs, reference)
        self.temp_dm = build_dofmap(mesh, "P2")
        self.MT = assembly.assemble_mass(self.temp_dm)
        self.KT = assembly.assemble_stiffness(self.temp_dm, 1.0)
        left = np.asarray(self.temp_dm.boundary_nodes["left"], dtype=np.int64)
        right = np.asarray(self.temp_dm.boundary_nodes["right"], dtype=np.int64)
        self.temp_bdofs = np.concatenate([left, right])
        self.temp_bvals = np.concatenate([np.ones(left.size), np.zeros(right.size)])

    def initial_state(self, v0=None, T0=None) -> FlowState:
        vel = (interpolate(self.mesh, self.vel_dm, v0, 0.0) if callable(v0)
               else (v0.copy() if v0 is not None else zero_field(self.vel_dm, 0.0)))
        if T0 is None:
            T0 = lambda x, y, t: 1.0 - x  # conduction profile
        temp = interpolate(self.mesh, self.temp_dm, T0, 0.0) if callable(T0) else T0.copy()
        return FlowState(velocity=vel, pressure=zero_field(self.pres_dm, 0.0),
                         temperature=temp, t=0.0)

    def step(self, state: FlowState, dt: float) -> FlowState:
        if dt <= 0:
            raise ValueError("dt must be positive")
        model = self.model
        t_new = state.t + dt
        wn = state.velocity.coeffs
        first = state.prev_velocity is None
        if first:
            wstar = state.velocity
        else:
            wstar = Field(self.vel_dm, 2.0 * wn - state.prev_velocity.coeffs)

        # temperature solve
        NT = assembly.assemble_scalar_advection(wstar, self.temp_dm)
        Tn = state.temperature.coeffs
        if first:
            AT = (1.0 / dt) * self.MT + NT + self.KT
            rhsT = (1.0 / dt) * (self.MT @ Tn)
        else:
            AT = (1.5 / dt) * self.MT + NT + self.KT
            rhsT = (self.MT @ (2.0 * Tn - 0.5 * state.prev_temperature.coeffs)) / dt
        if model.heat_source is not None:
            rhsT = rhsT + assembly.assemble_forcing(model.heat_source, t_new, self.temp_dm)
        sysT = apply_dirichlet(LinearSystem(AT.tocsr(), rhsT),
                               self.temp_bdofs, self.temp_bvals)
        T_new = solve(sysT, f"temperature step {self._step_count} t={state.t:.6g}")

        # momentum solve
        N = assembly.assemble_convection(wstar, self.vel_dm)
        if first:
            A_vv = (1.0 / dt) * self.M + N + model.Pr * self.K
            rhs = (1.0 / dt) * (self.M @ wn)
        else:
            A_vv = (1.5 / dt) * self.M + N + model.Pr * self.K
            rhs = (self.M @ (2.0 * wn - 0.5 * state.prev_velocity.coeffs)) / dt
        if not model.is_nudged and self.C is not None:
            A_vv = A_vv + model.omega * self.C
        if model.is_nudged:
            A_vv = A_vv + self.G
        Tf = Field(self.temp_dm, T_new)
        buoy = assembly.assemble_buoyancy(Tf, model.Pr, model.Ra, model.gravity, self.vel_dm)
        rhs = rhs + buoy
        fvec = np.zeros(self.nvel)
        if model.forcing is not None:
            fvec = assembly.assemble_forcing(model.forcing, t_new, self.vel_dm)
            rhs = rhs + fvec
        ubar = None
        if model.is_nudged:
            if self.obs is None:
                raise ValueError("nudged model requires an observation source")
            ubar = np.asarray(self.obs(t_new))
            rhs = rhs + self.to_load(ubar)

        x, react = self._solve_saddle(
            A_vv, rhs, self._boundary_velocity(t_new),
            f"bdf2 step {self._step_count} t={state.t:.6g}")
        w_new = x[:self.nvel]
        lam = _mean_zero(x[self.nvel:], self.mp_row_sums)
        if not np.all(np.isfinite(w_new)):
            raise FloatingPointError(f"NaN at bdf2 step {self._step_count}")

        self._record_bdf2(state, w_new, lam, dt, t_new, fvec + buoy, ubar, react, x, N)
        return FlowState(
            velocity=Field(self.vel_dm, w_new, t_new),
            pressure=Field(self.pres_dm, lam, t_new),
            temperature=Field(self.temp_dm, T_new, t_new),
            t=t_new,
            prev_velocity=state.velocity,
            prev_temperature=state.temperature,
        )

    def _record_bdf2(self, state, w_new, lam, dt, t_new, fvec, ubar, react, x, N):
        model = self.model
        kin_new = float(w_new @ (self.M @ w_new))
        grad_sq = float(w_new @ (self.K @ w_new))
        self.grad_v_max = max(self.grad_v_max, np.sqrt(grad_sq))
        nudge_energy = misfit = 0.0
        if model.is_nudged:
            ih_w = apply_IH(self.obs_op, Field(self.vel_dm, w_new))
            nudge_energy = model.chi * coarse_norm(self.obs_op, ih_w) ** 2
            misfit = model.chi * coarse_norm(self.obs_op, ubar - ih_w) ** 2
        # algebraic check: momentum residual tested with w_{n+1}
        bnd_work = float(w_new @ react[:self.nvel]) + float(x[self.nvel] * react[self.nvel])
        wn = state.velocity.coeffs
        if state.prev_velocity is None:
            inertia = float(w_new @ (self.M @ (w_new - wn))) / dt
        else:
            inertia = float(w_new @ (self.M @ (1.5 * w_new - 2.0 * wn
                                               + 0.5 * state.prev_velocity.coeffs))) / dt
        conv = float(w_new @ (N @ w_new))
        cor = 0.0
        if self.C is not None and not model.is_nudged:
            cor = model.omega * float(w_new @ (self.C @ w_new))
        nudge_pair = 0.0
        if model.is_nudged:
            nudge_pair = float(w_new @ (self.G @ w_new) - w_new @ self.to_load(ubar))
        pres = float(lam @ (self.B @ w_new))
        work = float(fvec @ w_new)
        residual = inertia + model.Pr * grad_sq + conv + cor + nudge_pair + pres - work - bnd_work
        self.ledger.append(
            step=self._step_count, t=t_new,
            kinetic=kin_new, dissipation=model.Pr * grad_sq,
            nudge_energy=nudge_energy, misfit=misfit, work=work,
            energy_residual=residual,
            div_residual=self._div_residual(w_new),
            err_L2=self._err_L2(Field(self.vel_dm, w_new), t_new),
            dt=dt,
        )
        self._step_count += 1


def run_to_steady(solver, state: FlowState, dt: float, tol: float = 1e-6,
                  max_steps: int = 200_000, energy_cap: float = 1e12,
                  callback=None):
    """Advance until ||w_{n+1} - w_n|| / dt < tol (and likewise for T).

    Returns (state, converged).  Energy growth past energy_cap aborts.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    from .spaces import norms
    for _ in range(max_steps):
        new = solver.step(state, dt)
        dv = Field(solver.vel_dm, new.velocity.coeffs - state.velocity.coeffs)
        rate, _ = norms(dv)
        rate /= dt
        if new.temperature is not None:
            dT = Field(solver.temp_dm, new.temperature.coeffs - state.temperature.coeffs)
            rT, _ = norms(dT)
            rate = max(rate, rT / dt)
        if solver.ledger.rows[-1]["kinetic"] > energy_cap:
            raise FloatingPointError("energy blow-up; aborting run")
        state = new
        if callback is not None:
            callback(state)
        if rate < tol:
            return state, True
    return state, False


def check_assumptions(chi: float, nu: float, omega: float, grad_v_max: float,
                      C1H: float, q0: float = 1.0, C2: float = 1.0) -> dict:
    """Diagnostic residuals of the nudging-parameter conditions.

    Continuous form: chi - omega*q0 - (2048/19683) nu^-3 ||grad v||^4
    must dominate alpha*chi/2 for some alpha in (0,1), and
    nu - 2 (C1 H)^2 chi must be positive.  The discrete form replaces the
    gradient constant by C2^4 * 9261/8.  Never aborts; only flags.
    """
    grad4 = grad_v_max ** 4
    margin = chi - omega * q0 - (2048.0 / 19683.0) * grad4 / nu ** 3
    alpha = min(2.0 * margin / chi, 1.0) if chi > 0 else 0.0
    h_residual = nu - 2.0 * (C1H ** 2) * chi
    disc_margin = chi - (C2 ** 4) * (9261.0 / 8.0) * grad4 / nu ** 3
    disc_alpha = min(disc_margin / chi, 1.0) if chi > 0 else 0.0
    disc_h_residual = nu - (C1H ** 2) * chi
    return {
        "chi_margin": margin,
        "alpha": alpha,
        "chi_condition_ok": bool(alpha > 0),
        "h_residual": h_residual,
        "h_condition_ok": bool(h_residual > 0),
        "discrete_chi_margin": disc_margin,
        "discrete_alpha": disc_alpha,
        "discrete_chi_condition_ok": bool(disc_alpha > 0),
        "discrete_h_residual": disc_h_residual,
        "discrete_h_condition_ok": bool(disc_h_residual > 0),
    }


def analytic_observation(obs_op: ObservationOperator, velocity_func):
    """Observation source sampling an analytic velocity's coarse means."""

    def obs(t: float) -> np.ndarray:
        u = interpolate(obs_op.fine_dofmap.mesh, obs_op.fine_dofmap, velocity_func, t)
        return apply_IH(obs_op, u)

    return obs

"""Experiment drivers: temporal convergence, nudging-parameter sweeps,
transient decay, and the differentially heated cavity benchmark.

Every driver is deterministic (fixed dof ordering, no randomized
algorithms): identical configuration produces bit-identical outputs.
Nudged runs receive nothing from a reference simulation except the
per-cell coarse means, carried by an ObservationSeries.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import assembly
from .linsolve import LinearSystem, apply_dirichlet, solve
from .mesh import Mesh, build_unit_square_mesh, write_vtk
from .models import ManufacturedSolution, ModelSpec, manufactured_forcing
from .observation import ObservationSeries, apply_IH, write_observations
from .spaces import Field, build_dofmap, interpolate, l2_error, norms, zero_field
from .stepping import (BoussinesqSolver, CnleSolver, FlowState,
                       analytic_observation, run_to_steady)

SOLVER_FLOOR = 1e-9


@dataclass
class RateTable:
    """Rows of (parameter, error) with successive rates / fitted slope."""

    params: np.ndarray
    errors: np.ndarray
    label: str = "dt"

    def rates(self) -> np.ndarray:
        """rate_i = log2(err_{i-1}/err_i); meaningful when params halve."""
        r = np.full(self.errors.size, np.nan)
        for i in range(1, self.errors.size):
            ratio = self.params[i - 1] / self.params[i]
            r[i] = np.log(self.errors[i - 1] / self.errors[i]) / np.log(ratio)
        return r

    def loglog_slope(self, mask=None) -> float:
        p, e = self.params, self.errors
        if mask is not None:
            p, e = p[mask], e[mask]
        if p.size < 2:
            raise ValueError("fit window too short")
        return float(np.polyfit(np.log(p), np.log(e), 1)[0])

    def write_csv(self, path, rate_col="rate"):
        rates = self.rates()
        with open(path, "w") as fh:
            fh.write(f"{self.label},error,{rate_col}\n")
            for p, e, r in zip(self.params, self.errors, rates):
                rtxt = "" if np.isnan(r) else f"{r:.17g}"
                fh.write(f"{p:.17g},{e:.17g},{rtxt}\n")


@dataclass
class RunRecord:
    """Configuration snapshot, time series, final fields, summary scalars."""

    config: dict
    ledger: object = None
    final_state: FlowState | None = None
    summary: dict = field(default_factory=dict)


def _mass_norm_diff(solver, a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(np.sqrt(d @ (solver.M @ d)))


# ---------------------------------------------------------------------------
# temporal convergence (manufactured solution)
# ---------------------------------------------------------------------------

def _converge_one(args):
    n, coarse_n, nu, omega, chi, dt, t_final = args
    mesh = build_unit_square_mesh(n)
    ms = ManufacturedSolution()
    f = manufactured_forcing(ms, nu, omega, include_coriolis=True)
    model = ModelSpec(kind="nse-nudged", nu=nu, chi=chi, boundary="manufactured",
                      forcing=f, t_final=t_final, dt=dt)
    solver = CnleSolver(mesh, model, coarse_n=coarse_n)
    solver.obs = analytic_observation(solver.obs_op, ms.velocity_field)
    state = solver.initial_state(ms.velocity_field)
    state = solver.run(state, t_final, dt)
    err = l2_error(state.velocity, lambda x, y, t: ms.velocity(x, y, t))
    max_eres = float(np.max(np.abs(solver.ledger.column("energy_residual"))))
    max_div = float(np.max(solver.ledger.column("div_residual")))
    return err, max_eres, max_div


def run_convergence(n=32, coarse_n=8, nu=1.0, omega=1.0, chi=100.0,
                    dt_list=(1.0, 0.5, 0.25, 0.125, 0.0625), t_final=2.0,
                    jobs=1, out_dir=None) -> RateTable:
    """Manufactured-solution CNLE convergence study in the time step."""
    dts = np.asarray(sorted(dt_list, reverse=True), dtype=float)
    args = [(n, coarse_n, nu, omega, chi, dt, t_final) for dt in dts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_converge_one, args))
    else:
        results = [_converge_one(a) for a in args]
    errors = np.array([r[0] for r in results])
    table = RateTable(params=dts, errors=errors, label="dt")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        table.write_csv(os.path.join(out_dir, "convergence.csv"))
    return table


# ---------------------------------------------------------------------------
# model-error chi sweep (Theorem 3.1 chi^{-1/2} behavior)
# ---------------------------------------------------------------------------

def beta_plane(x, y):
    """Latitude-dependent rotation rate beta(y) = y for the sweep DNS.

    The constant-rate rotation of a divergence-free 2D field is curl
    free, hence a pressure gradient with no velocity footprint; a
    variable rate keeps every assumed property of R (pointwise
    antisymmetry, Lipschitz bound 1) while acting as a genuine body
    force, so the chi^{-1/2} model-error law is actually observable.
    """
    return np.broadcast_to(np.asarray(y, dtype=float),
                           np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _dns_reference(n, coarse_n, nu, omega, dt, t_final, include_coriolis=True,
                   rotation_coeff=None):
    """Run the data-generating NSE, collecting coarse means every step."""
    mesh = build_unit_square_mesh(n)
    ms = ManufacturedSolution()
    f = manufactured_forcing(ms, nu, omega, include_coriolis=include_coriolis)
    model = ModelSpec(kind="nse-dns", nu=nu, omega=omega, boundary="manufactured",
                      rotation_coeff=rotation_coeff, forcing=f,
                      t_final=t_final, dt=dt)
    solver = CnleSolver(mesh, model)
    # sampling operator for exporting the observations
    from .observation import build_observation
    obs_op = build_observation(mesh, solver.vel_dm, coarse_n)
    state = solver.initial_state(ms.velocity_field)
    times = [0.0]
    samples = [apply_IH(obs_op, state.velocity)]
    fields = [state.velocity.coeffs.copy()]
    n_steps = int(round(t_final / dt))
    for _ in range(n_steps):
        state = solver.step(state, dt)
        times.append(state.t)
        samples.append(apply_IH(obs_op, state.velocity))
        fields.append(state.velocity.coeffs.copy())
    series = ObservationSeries(np.array(times), np.array(samples))
    return mesh, solver, state, series, np.array(fields), f


def _nudged_final(mesh, coarse_n, nu, chi, dt, t_final, f, series, v0_func=None):
    model = ModelSpec(kind="nse-nudged", nu=nu, chi=chi, boundary="manufactured",
                      forcing=f, t_final=t_final, dt=dt)
    solver = CnleSolver(mesh, model, coarse_n=coarse_n, obs=series)
    if v0_func is None:
        state = solver.initial_state(zero_field(solver.vel_dm))
    else:
        state = solver.initial_state(v0_func)
    state = solver.run(state, t_final, dt)
    return solver, state


def run_chi_sweep(n=8, coarse_n=4, nu=1.0, omega=1.0, dt=0.01, t_final=1.0,
                  chi_list=(1e1, 1e2, 1e3, 1e4, 1e5), jobs=1,
                  out_dir=None) -> RateTable:
    """Final-time error between same-grid DNS and nudged runs vs chi.

    The DNS carries the omitted term omega * beta(y) R(w); the nudged
    runs see only its coarse samples.  The forcing is the plain
    manufactured body force (no rotation contribution), so the DNS is
    simply a smooth reference flow, not the manufactured solution.
    """
    mesh, dns_solver, dns_state, series, _, f = _dns_reference(
        n, coarse_n, nu, omega, dt, t_final, include_coriolis=False,
        rotation_coeff=beta_plane)
    ms = ManufacturedSolution()
    chis = np.asarray(sorted(chi_list), dtype=float)
    errors = np.empty(chis.size)
    for i, chi in enumerate(chis):
        solver, state = _nudged_final(mesh, coarse_n, nu, chi, dt, t_final, f,
                                      series, v0_func=ms.velocity_field)
        errors[i] = _mass_norm_diff(dns_solver, dns_state.velocity.coeffs,
                                    state.velocity.coeffs)
    table = RateTable(params=chis, errors=errors, label="chi")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "chi_sweep.csv"), "w") as fh:
            fh.write("chi,error\n")
            for c, e in zip(chis, errors):
                fh.write(f"{c:.17g},{e:.17g}\n")
    return table


def chi_sweep_slope(table: RateTable, floor: float | None = None) -> float:
    """Log-log slope over the pre-floor window (errors above 10x floor)."""
    floor = SOLVER_FLOOR if floor is None else floor
    mask = table.errors > 10.0 * floor
    if mask.sum() < 2:
        raise ValueError("chi-sweep fit window is empty")
    return table.loglog_slope(mask)


# ---------------------------------------------------------------------------
# transient decay (exponential contraction of the initial error)
# ---------------------------------------------------------------------------

def run_decay(n=16, coarse_n=16, nu=0.01, dt=5e-4, t_final=0.4,
              chi_list=(10.0, 20.0, 100.0, 1000.0), out_dir=None) -> dict:
    """Decay of ||v - u_DNS|| from v0 = 0; returns fitted rates per chi.

    omega = 0 so the model term is absent and only the transient is
    measured against the same-grid DNS of the plain NSE.  Defaults:
    small viscosity so the chi-driven contraction dominates the plain
    NSE contraction, and fine-grid piecewise-constant observations so
    the observable fraction of the error stays near one and the fitted
    rate tracks chi across the whole list.
    """
    mesh, dns_solver, _, series, dns_fields, f = _dns_reference(
        n, coarse_n, nu, omega=0.0, dt=dt, t_final=t_final, include_coriolis=False)
    results = {}
    for chi in chi_list:
        model = ModelSpec(kind="nse-nudged", nu=nu, chi=chi, boundary="manufactured",
                          forcing=f, t_final=t_final, dt=dt)
        solver = CnleSolver(mesh, model, coarse_n=coarse_n, obs=series)
        state = solver.initial_state(zero_field(solver.vel_dm))
        errs = [_mass_norm_diff(dns_solver, dns_fields[0], state.velocity.coeffs)]
        times = [0.0]
        kstep = 0
        n_steps = int(round(t_final / dt))
        for _ in range(n_steps):
            state = solver.step(state, dt)
            kstep += 1
            errs.append(_mass_norm_diff(dns_solver, dns_fields[kstep],
                                        state.velocity.coeffs))
            times.append(state.t)
        times = np.array(times)
        errs = np.array(errs)
        rate = fit_decay_rate(times, errs)
        results[chi] = {"t": times, "err": errs, "rate": rate}
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, f"decay_{chi:g}.csv"), "w") as fh:
                fh.write("t,err\n")
                for t, e in zip(times, errs):
                    fh.write(f"{t:.17g},{e:.17g}\n")
    return results


def fit_decay_rate(times: np.ndarray, errs: np.ndarray, skip: int = 2,
                   floor_factor: float = 10.0, drop_factor: float = np.e**2) -> float:
    """Least-squares slope of -log||e|| over the transient decay window.

    The first 'skip' samples are excluded (they carry the one-step
    adjustment of an initial state inconsistent with the boundary and
    observation data).  The window then runs until the error has fallen
    by drop_factor or approaches floor_factor times the terminal error,
    so the fit sees the exponential regime before any plateau.
    """
    if errs.size <= skip + 1:
        raise ValueError("decay fit window too short")
    e_s = errs[skip]
    floor = floor_factor * max(errs[-1], 1e-300)
    mask = errs[skip:] > max(e_s / drop_factor, floor)
    stop = skip + (np.argmin(mask) if not mask.all() else mask.size)
    stop = min(stop + 1, errs.size)  # include the first sample past the drop
    if stop - skip < 2:
        raise ValueError("decay fit window too short")
    sl = slice(skip, stop)
    return float(-np.polyfit(times[sl], np.log(errs[sl]), 1)[0])


# ---------------------------------------------------------------------------
# Nusselt numbers, vorticity, streamfunction
# ---------------------------------------------------------------------------

_EDGE_GAUSS = (np.array([0.5 - np.sqrt(15) / 10, 0.5, 0.5 + np.sqrt(15) / 10]),
               np.array([5 / 18, 8 / 18, 5 / 18]))


def compute_nusselt(T: Field, side: str = "hot"):
    """Local Nusselt profile on a vertical wall.

    Returns (y, nu_local, weights) sampled at 3 Gauss points per wall
    edge, ordered by y.  Sign convention: pure conduction T = 1 - x
    gives nu_local = +1 on both walls.
    """
    if side not in ("hot", "cold"):
        raise ValueError("side must be 'hot' or 'cold'")
    marker = "left" if side == "hot" else "right"
    dm = T.dofmap
    mesh = dm.mesh
    from .spaces import eval_basis, _geometry
    detJ, invJT = _geometry(mesh)
    s_pts, s_w = _EDGE_GAUSS
    ys, nus, ws = [], [], []
    for ei, m in zip(mesh.boundary_edges, mesh.boundary_markers):
        if m != marker:
            continue
        (tri_k,) = mesh.edge_tris[ei]
        verts = mesh.triangles[tri_k]
        va, vb = mesh.edges[ei]
        la = int(np.flatnonzero(verts == va)[0])
        lb = int(np.flatnonzero(verts == vb)[0])
        edge_len = abs(mesh.vertices[va, 1] - mesh.vertices[vb, 1])
        for s, w in zip(s_pts, s_w):
            bary = np.zeros(3)
            bary[la] = 1.0 - s
            bary[lb] = s
            _, grads = eval_basis(dm.kind, bary[None, :])
            gphys = grads[0] @ invJT[tri_k].T  # (nloc, 2)
            coeffs = T.coeffs[dm.cell_nodes[tri_k]]
            dTdx = float(coeffs @ gphys[:, 0])
            y = (1.0 - s) * mesh.vertices[va, 1] + s * mesh.vertices[vb, 1]
            ys.append(y)
            nus.append(-dTdx)
            ws.append(w * edge_len)
    order = np.argsort(ys)
    return np.array(ys)[order], np.array(nus)[order], np.array(ws)[order]


def wall_average_nusselt(T: Field, side: str = "hot") -> float:
    _, nus, ws = compute_nusselt(T, side)
    return float(np.sum(nus * ws) / np.sum(ws))


def compute_vorticity_stream(w: Field):
    """Vorticity (P1 L2 projection of curl w) and streamfunction.

    The streamfunction uses the w = (-psi_y, psi_x) convention, so it
    solves the Poisson problem lap(psi) = vorticity with psi = 0 on the
    boundary.
    """
    mesh = w.dofmap.mesh
    p1 = build_dofmap(mesh, "P1")
    M1 = assembly.assemble_mass(p1)
    K1 = assembly.assemble_stiffness(p1, 1.0)
    curl_load = assembly.assemble_curl_load(w, p1)
    vort = solve(LinearSystem(M1, curl_load), "vorticity projection")
    sys_psi = apply_dirichlet(LinearSystem(K1, -(M1 @ vort)),
                              p1.boundary_dofs(), 0.0)
    psi = solve(sys_psi, "streamfunction poisson")
    return Field(p1, vort, w.t), Field(p1, psi, w.t)


# ---------------------------------------------------------------------------
# double-pane cavity benchmark
# ---------------------------------------------------------------------------

def _export_case(out_dir, case, solver, state):
    vort, psi = compute_vorticity_stream(state.velocity)
    point_data = {
        "velocity": state.velocity.vertex_values(),
        "vorticity": vort.vertex_values(),
        "streamfunction": psi.vertex_values(),
    }
    if state.temperature is not None:
        point_data["temperature"] = state.temperature.vertex_values()
        ys, nus, _ = compute_nusselt(state.temperature, "hot")
        with open(os.path.join(out_dir, f"nusselt_{case}.csv"), "w") as fh:
            fh.write("y,nu\n")
            for y, nu in zip(ys, nus):
                fh.write(f"{y:.17g},{nu:.17g}\n")
    write_vtk(os.path.join(out_dir, f"fields_{case}.vtk"), solver.mesh, point_data)
    solver.ledger.write_csv(os.path.join(out_dir, f"series_{case}.csv"))


def run_cavity_dns(n=32, Ra=1e4, Pr=0.71, omega=0.0, dt=1e-3,
                   steady_tol=1e-6, max_steps=20000, coarse_n=8,
                   sample_every=10, rotation_coeff=None):
    """DNS cavity run to steady state, sampling coarse means on the way."""
    mesh = build_unit_square_mesh(n)
    kind = "boussinesq-dns"
    model = ModelSpec(kind=kind, Pr=Pr, Ra=Ra, omega=omega, boundary="cavity",
                      rotation_coeff=rotation_coeff, t_final=max_steps * dt, dt=dt)
    solver = BoussinesqSolver(mesh, model)
    from .observation import build_observation
    obs_op = build_observation(mesh, solver.vel_dm, coarse_n)
    state = solver.initial_state()
    times = [0.0]
    samples = [apply_IH(obs_op, state.velocity)]

    def sampler(st):
        k = solver._step_count
        if k % sample_every == 0:
            times.append(st.t)
            samples.append(apply_IH(obs_op, st.velocity))

    state, converged = run_to_steady(solver, state, dt, tol=steady_tol,
                                     max_steps=max_steps, callback=sampler)
    if times[-1] < state.t:
        times.append(state.t)
        samples.append(apply_IH(obs_op, state.velocity))
    series = ObservationSeries(np.array(times), np.array(samples))
    return solver, state, series, converged


def run_cavity_nudged(n, Ra, Pr, chi, series, dt=1e-3, steady_tol=1e-6,
                      max_steps=20000, coarse_n=8):
    mesh = build_unit_square_mesh(n)
    model = ModelSpec(kind="boussinesq-nudged", Pr=Pr, Ra=Ra, chi=chi,
                      boundary="cavity", t_final=max_steps * dt, dt=dt)
    solver = BoussinesqSolver(mesh, model, coarse_n=coarse_n, obs=series)
    state = solver.initial_state()
    state, converged = run_to_steady(solver, state, dt, tol=steady_tol,
                                     max_steps=max_steps)
    return solver, state, converged


def run_double_pane(n=32, Ra=1e4, Pr=0.71, omega=5e6, dt=1e-3,
                    chi_list=(1.0, 1e2, 1e4, 1e6), steady_tol=1e-6,
                    max_steps=20000, coarse_n=8, out_dir=None,
                    jobs=1, rotation_coeff=None, nudged_max_steps=None) -> dict:
    """Benchmark triple: DNS without/with rotation, then nudged per chi.

    Nudged runs get a larger step budget (default 2 * max_steps) because
    once the observation window ends they keep relaxing toward the held
    final snapshot and typically reach steady state only then.
    """
    if nudged_max_steps is None:
        nudged_max_steps = 2 * max_steps
    out = {"config": dict(n=n, Ra=Ra, Pr=Pr, omega=omega, dt=dt,
                          chi_list=list(chi_list), steady_tol=steady_tol,
                          coarse_n=coarse_n)}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    plain_solver, plain_state, _, conv0 = run_cavity_dns(
        n, Ra, Pr, omega=0.0, dt=dt, steady_tol=steady_tol,
        max_steps=max_steps, coarse_n=coarse_n)
    dns_solver, dns_state, series, conv1 = run_cavity_dns(
        n, Ra, Pr, omega=omega, dt=dt, steady_tol=steady_tol,
        max_steps=max_steps, coarse_n=coarse_n,
        rotation_coeff=rotation_coeff)
    out["dns_converged"] = bool(conv0 and conv1)

    obs_csv = None
    if out_dir is not None:
        obs_csv = os.path.join(out_dir, "observations_dns_coriolis.csv")
        write_observations(obs_csv, series.times, series.values)
        series = ObservationSeries.from_csv(obs_csv)
        _export_case(out_dir, "dns_no_coriolis", plain_solver, plain_state)
        _export_case(out_dir, "dns_coriolis", dns_solver, dns_state)

    nus_dns = compute_nusselt(dns_state.temperature, "hot")[1]
    D = {}
    nu_gap = {}
    for chi in chi_list:
        solver, state, conv = run_cavity_nudged(
            n, Ra, Pr, chi, series, dt=dt, steady_tol=steady_tol,
            max_steps=nudged_max_steps, coarse_n=coarse_n)
        D[chi] = _mass_norm_diff(dns_solver, state.velocity.coeffs,
                                 dns_state.velocity.coeffs)
        nus = compute_nusselt(state.temperature, "hot")[1]
        nu_gap[chi] = float(np.max(np.abs(nus - nus_dns)))
        out.setdefault("nudged_converged", {})[chi] = bool(conv)
        if out_dir is not None:
            _export_case(out_dir, f"nudged_chi{chi:g}", solver, state)
    out["D"] = D
    out["nusselt_gap"] = nu_gap
    out["nusselt_avg_dns"] = wall_average_nusselt(dns_state.temperature, "hot")
    out["nusselt_avg_no_coriolis"] = wall_average_nusselt(plain_state.temperature, "hot")
    if out_dir is not None:
        summary = {k: v for k, v in out.items()}
        summary["D"] = {f"{c:g}": v for c, v in D.items()}
        summary["nusselt_gap"] = {f"{c:g}": v for c, v in nu_gap.items()}
        if "nudged_converged" in summary:
            summary["nudged_converged"] = {f"{c:g}": v for c, v in out["nudged_converged"].items()}
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
    return out

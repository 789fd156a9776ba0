"""Time integrators: energy identity, stability, boundary handling."""
import numpy as np
import pytest

from nudge_ns.mesh import build_unit_square_mesh
from nudge_ns.models import ManufacturedSolution, ModelSpec, manufactured_forcing
from nudge_ns.spaces import Field, interpolate, l2_error, zero_field
from nudge_ns.stepping import (BoussinesqSolver, CnleSolver, analytic_observation,
                               check_assumptions, run_to_steady)


@pytest.fixture(scope="module")
def manufactured_solver():
    mesh = build_unit_square_mesh(8)
    ms = ManufacturedSolution()
    f = manufactured_forcing(ms, 1.0, 1.0, include_coriolis=True)
    model = ModelSpec(kind="nse-nudged", nu=1.0, chi=100.0,
                      boundary="manufactured", forcing=f)
    solver = CnleSolver(mesh, model, coarse_n=4)
    solver.obs = analytic_observation(solver.obs_op, ms.velocity_field)
    return mesh, ms, solver


def _forced_noslip_solver(dt, chi=100.0, nu=1.0, track=True):
    mesh = build_unit_square_mesh(8)
    ms = ManufacturedSolution()
    f = manufactured_forcing(ms, nu, 1.0, include_coriolis=True)
    model = ModelSpec(kind="nse-nudged", nu=nu, chi=chi, boundary="cavity",
                      forcing=f, dt=dt)
    solver = CnleSolver(mesh, model, coarse_n=4, track_stability=track)
    solver.obs = analytic_observation(solver.obs_op, ms.velocity_field)
    return solver


def test_energy_identity_every_step(manufactured_solver):
    mesh, ms, solver = manufactured_solver
    state = solver.initial_state(ms.velocity_field)
    solver.run(state, 1.0, 0.1)
    kin = solver.ledger.column("kinetic")
    res = solver.ledger.column("energy_residual")
    assert np.all(np.abs(res) <= 1e-8 * np.maximum(1.0, kin))


def test_divergence_residual_every_step(manufactured_solver):
    mesh, ms, solver = manufactured_solver
    state = solver.initial_state(ms.velocity_field)
    solver.run(state, 0.5, 0.1)
    assert np.max(solver.ledger.column("div_residual")) <= 1e-9


def test_boundary_trace_exact_after_step():
    mesh = build_unit_square_mesh(4)
    ms = ManufacturedSolution()
    f = manufactured_forcing(ms, 1.0, 1.0)
    model = ModelSpec(kind="nse-dns", nu=1.0, omega=1.0,
                      boundary="manufactured", forcing=f)
    solver = CnleSolver(mesh, model)
    state = solver.initial_state(ms.velocity_field)
    for _ in range(3):
        state = solver.step(state, 0.25)
        g = solver._boundary_velocity(state.t)
        got = state.velocity.coeffs[solver.vel_bdofs]
        assert np.max(np.abs(got - g)) <= 1e-10


@pytest.mark.parametrize("dt", [1.0, 0.5, 0.25, 0.0625])
def test_unconditional_stability_inequality(dt):
    # forced no-slip nudged run from rest; per-step discrete energy bound:
    # kin_{n+1} - kin_n + dt nu |grad v_mid|^2
    #   <= dt (nu^-1 |f|_{-1}^2 + chi |data|_coarse^2)
    # which follows from the energy identity by Cauchy-Schwarz and Young.
    solver = _forced_noslip_solver(dt)
    state = solver.initial_state(zero_field(solver.vel_dm))
    n_steps = max(4, int(round(2.0 / dt)))
    for _ in range(n_steps):
        state = solver.step(state, dt)
    led = solver.ledger
    kin = led.column("kinetic")
    kin_prev = led.column("kinetic_prev")
    dissip = led.column("dissipation")
    dual = led.column("force_dual_sq")
    data = led.column("data_norm_sq")
    nu = solver.model.nu
    lhs = kin - kin_prev + dt * dissip
    rhs = dt * (dual / nu + data)
    slack = 1e-6 * np.maximum(1.0, kin)
    assert np.all(lhs <= rhs + slack)
    # and the solution stays bounded even at dt = 1
    assert np.all(np.isfinite(kin)) and kin[-1] < 1e6


def test_cnle_rejects_boussinesq_and_bad_dt():
    mesh = build_unit_square_mesh(2)
    with pytest.raises(ValueError):
        CnleSolver(mesh, ModelSpec(kind="boussinesq-dns"))
    model = ModelSpec(kind="nse-dns", nu=1.0)
    solver = CnleSolver(mesh, model)
    state = solver.initial_state(zero_field(solver.vel_dm))
    with pytest.raises(ValueError):
        solver.step(state, 0.0)


def test_nudged_without_observations_raises():
    mesh = build_unit_square_mesh(2)
    model = ModelSpec(kind="nse-nudged", chi=1.0, boundary="cavity")
    solver = CnleSolver(mesh, model, coarse_n=2)
    state = solver.initial_state(zero_field(solver.vel_dm))
    with pytest.raises(ValueError):
        solver.step(state, 0.1)


def test_manufactured_single_step_accuracy():
    # one CNLE step from exact data stays within O(dt^2) of the solution
    mesh = build_unit_square_mesh(8)
    ms = ManufacturedSolution()
    f = manufactured_forcing(ms, 1.0, 1.0)
    model = ModelSpec(kind="nse-dns", nu=1.0, omega=1.0,
                      boundary="manufactured", forcing=f)
    solver = CnleSolver(mesh, model)
    errs = []
    for dt in (0.4, 0.2):
        state = solver.initial_state(ms.velocity_field)
        state = solver.step(state, dt)
        errs.append(l2_error(state.velocity, lambda x, y, t: ms.velocity(x, y, t)))
    # second order in dt; smaller steps would hit the n=8 spatial floor
    assert errs[0] / errs[1] > 3.0


def test_boussinesq_conduction_equilibrium():
    # Ra = 0: no buoyancy, fluid at rest, T = 1 - x is a fixed point
    mesh = build_unit_square_mesh(4)
    model = ModelSpec(kind="boussinesq-dns", Pr=0.71, Ra=0.0, boundary="cavity")
    solver = BoussinesqSolver(mesh, model)
    state = solver.initial_state()
    for _ in range(3):
        state = solver.step(state, 0.1)
    assert np.max(np.abs(state.velocity.coeffs)) <= 1e-10
    T_exact = interpolate(mesh, solver.temp_dm, lambda x, y, t: 1.0 - x)
    assert np.max(np.abs(state.temperature.coeffs - T_exact.coeffs)) <= 1e-9


def test_boussinesq_energy_residual():
    mesh = build_unit_square_mesh(8)
    model = ModelSpec(kind="boussinesq-dns", Pr=0.71, Ra=1e4, boundary="cavity")
    solver = BoussinesqSolver(mesh, model)
    state = solver.initial_state()
    for _ in range(20):
        state = solver.step(state, 1e-3)
    kin = solver.ledger.column("kinetic")
    res = solver.ledger.column("energy_residual")
    assert np.all(np.abs(res) <= 1e-8 * np.maximum(1.0, kin))
    assert np.max(solver.ledger.column("div_residual")) <= 1e-9


def test_boussinesq_rejects_nse_kind():
    mesh = build_unit_square_mesh(2)
    with pytest.raises(ValueError):
        BoussinesqSolver(mesh, ModelSpec(kind="nse-dns"))


def test_run_to_steady_decaying_flow():
    # unforced no-slip flow decays to rest
    mesh = build_unit_square_mesh(4)
    model = ModelSpec(kind="nse-dns", nu=1.0, boundary="cavity")
    solver = CnleSolver(mesh, model)
    v0 = interpolate(mesh, solver.vel_dm,
                     lambda x, y, t: (np.sin(np.pi * x) * np.sin(np.pi * y),
                                      np.zeros_like(x)))
    # the scheme maps div(v_n) to -div(v_{n+1}), so a non-solenoidal
    # component of the initial state never decays; project it out first
    x, _ = solver._solve_saddle(solver.M, solver.M @ v0.coeffs,
                                np.zeros(solver.vel_bdofs.size), "projection")
    v0 = Field(solver.vel_dm, x[:solver.nvel])
    state = solver.initial_state(v0)
    state, converged = run_to_steady(solver, state, 0.05, tol=1e-5, max_steps=2000)
    assert converged
    assert np.max(np.abs(state.velocity.coeffs)) <= 1e-4
    with pytest.raises(ValueError):
        run_to_steady(solver, state, 0.05, tol=0.0)


def test_check_assumptions_flags():
    good = check_assumptions(chi=100.0, nu=1.0, omega=1.0, grad_v_max=1.0, C1H=0.01)
    assert good["chi_condition_ok"] and good["h_condition_ok"]
    bad = check_assumptions(chi=1.0, nu=1.0, omega=10.0, grad_v_max=1.0, C1H=0.01)
    assert not bad["chi_condition_ok"]
    coarse = check_assumptions(chi=100.0, nu=0.01, omega=0.0, grad_v_max=0.0, C1H=0.5)
    assert not coarse["h_condition_ok"]


def test_ledger_csv(tmp_path, manufactured_solver):
    mesh, ms, solver = manufactured_solver
    path = tmp_path / "series.csv"
    solver.ledger.write_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:3] == ["step", "t", "kinetic"]
    assert "energy_residual" in header and "div_residual" in header

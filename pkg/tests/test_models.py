"""Model definitions and the manufactured solution."""
import numpy as np
import pytest

from nudge_ns.models import (ManufacturedSolution, ModelSpec, boundary_values,
                             manufactured_forcing)


@pytest.fixture(scope="module")
def ms():
    return ManufacturedSolution()


def test_divergence_free_pointwise(ms, rng):
    x = rng.uniform(0, 1, 100)
    y = rng.uniform(0, 1, 100)
    t = rng.uniform(0, 2, 100)
    assert np.max(np.abs(ms.divergence(x, y, t))) <= 1e-12
    # independent check by central differences of the velocity
    h = 1e-6
    u1p, _ = ms.velocity(x + h, y, t)
    u1m, _ = ms.velocity(x - h, y, t)
    _, u2p = ms.velocity(x, y + h, t)
    _, u2m = ms.velocity(x, y - h, t)
    div_fd = (u1p - u1m + u2p - u2m) / (2 * h)
    assert np.max(np.abs(div_fd)) <= 1e-8


def test_forcing_value_at_origin(ms):
    # frozen hand-computed value: nu = omega = 1, t = 0, x = y = 0 gives
    # u = (1, 0); f1 = u1 + 0 + nu u1 + 1 - omega u2 = 3, f2 = u2 + u1 - 1 + omega u1 = 1
    f1, f2 = ms.forcing_terms(1.0, 1.0, 0.0, 0.0, 0.0)
    assert abs(f1 - 3.0) <= 1e-15
    assert abs(f2 - 1.0) <= 1e-15


def test_forcing_by_finite_differences(ms, rng):
    # independent oracle: rebuild u_t + u.grad u - nu lap u + grad p + omega R(u)
    # from finite differences of the closed-form fields
    nu, omega = 0.7, 2.5
    x = rng.uniform(0.1, 0.9, 20)
    y = rng.uniform(0.1, 0.9, 20)
    t = rng.uniform(0.0, 1.0, 20)
    h = 1e-5

    def vel(xx, yy, tt):
        return np.stack(ms.velocity(xx, yy, tt))

    u = vel(x, y, t)
    ut = (vel(x, y, t + h) - vel(x, y, t - h)) / (2 * h)
    ux = (vel(x + h, y, t) - vel(x - h, y, t)) / (2 * h)
    uy = (vel(x, y + h, t) - vel(x, y - h, t)) / (2 * h)
    lap = (vel(x + h, y, t) + vel(x - h, y, t) + vel(x, y + h, t)
           + vel(x, y - h, t) - 4 * u) / h ** 2
    px = (ms.pressure(x + h, y, t) - ms.pressure(x - h, y, t)) / (2 * h)
    py = (ms.pressure(x, y + h, t) - ms.pressure(x, y - h, t)) / (2 * h)
    conv = u[0] * ux + u[1] * uy
    rot = np.stack([-u[1], u[0]])
    f_fd = ut + conv - nu * lap + np.stack([px, py]) + omega * rot
    f1, f2 = ms.forcing_terms(nu, omega, x, y, t)
    assert np.max(np.abs(f_fd[0] - f1)) <= 1e-5
    assert np.max(np.abs(f_fd[1] - f2)) <= 1e-5


def test_strong_residual_zero(ms, rng):
    f = manufactured_forcing(ms, 0.3, 4.0, include_coriolis=True)
    x = rng.uniform(0, 1, 50)
    y = rng.uniform(0, 1, 50)
    r1, r2 = ms.strong_residual(f, 0.3, 4.0, x, y, 0.7)
    assert np.max(np.abs(r1)) <= 1e-10
    assert np.max(np.abs(r2)) <= 1e-10


def test_forcing_without_rotation_term(ms):
    f_with = manufactured_forcing(ms, 1.0, 5.0, include_coriolis=True)
    f_without = manufactured_forcing(ms, 1.0, 5.0, include_coriolis=False)
    x = np.array([0.3])
    y = np.array([0.6])
    u1, u2 = ms.velocity(x, y, 0.0)
    d1 = f_with(x, y, 0.0)[0] - f_without(x, y, 0.0)[0]
    d2 = f_with(x, y, 0.0)[1] - f_without(x, y, 0.0)[1]
    np.testing.assert_allclose(d1, -5.0 * u2, atol=1e-14)
    np.testing.assert_allclose(d2, 5.0 * u1, atol=1e-14)


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(kind="unknown")
    with pytest.raises(ValueError):
        ModelSpec(kind="nse-dns", nu=0.0)
    with pytest.raises(ValueError):
        ModelSpec(kind="boussinesq-dns", Pr=-1.0)
    with pytest.raises(ValueError):
        ModelSpec(kind="nse-nudged", chi=-1.0)
    with pytest.raises(ValueError):
        ModelSpec(kind="nse-dns", dt=0.0)
    spec = ModelSpec(kind="boussinesq-nudged", chi=10.0)
    assert spec.is_nudged and spec.is_boussinesq
    assert spec.viscosity == spec.Pr
    assert ModelSpec(kind="nse-dns", nu=0.5).viscosity == 0.5


def test_boundary_values():
    x = np.array([0.0])
    y = np.array([0.5])
    (v1, v2), T = boundary_values("cavity", "left", 0.0, x, y)
    assert v1 == 0.0 and v2 == 0.0 and T == 1.0
    assert boundary_values("cavity", "right", 0.0, x, y)[1] == 0.0
    assert boundary_values("cavity", "top", 0.0, x, y)[1] is None
    (u1, u2), T = boundary_values("manufactured", "left", 0.3, x, y)
    ms = ManufacturedSolution()
    e1, e2 = ms.velocity(x, y, 0.3)
    assert abs(u1 - e1) <= 1e-15 and abs(u2 - e2) <= 1e-15 and T is None
    with pytest.raises(ValueError):
        boundary_values("cavity", "middle", 0.0, x, y)
    with pytest.raises(ValueError):
        boundary_values("weird", "left", 0.0, x, y)

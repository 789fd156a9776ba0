"""Shared fixtures: small meshes and dof maps reused across test modules."""
import numpy as np
import pytest

from nudge_ns.mesh import build_unit_square_mesh
from nudge_ns.spaces import build_dofmap


@pytest.fixture(scope="session")
def mesh4():
    return build_unit_square_mesh(4)


@pytest.fixture(scope="session")
def mesh8():
    return build_unit_square_mesh(8)


@pytest.fixture(scope="session")
def vel_dm4(mesh4):
    return build_dofmap(mesh4, "P2v")


@pytest.fixture(scope="session")
def pres_dm4(mesh4):
    return build_dofmap(mesh4, "P1")


@pytest.fixture(scope="session")
def vel_dm8(mesh8):
    return build_dofmap(mesh8, "P2v")


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)

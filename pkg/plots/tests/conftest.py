"""Synthetic artifact fixtures mirroring the simulator's file formats."""
import numpy as np
import pytest


def _vtk_text(nx=4, case_shift=0.0):
    xs = np.linspace(0.0, 1.0, nx + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    pts = np.column_stack([xv.ravel(), yv.ravel()])
    nv = pts.shape[0]

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(nx):
        for i in range(nx):
            tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            tris.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    nt = len(tris)
    x, y = pts[:, 0], pts[:, 1]
    psi = np.sin(np.pi * x) * np.sin(np.pi * y) + case_shift
    temp = 1.0 - x
    vort = 2.0 * np.pi ** 2 * psi
    lines = ["# vtk DataFile Version 3.0", "synthetic", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{px:.17g} {py:.17g} 0" for px, py in pts]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {nv}")
    for name, vals in (("streamfunction", psi), ("temperature", temp),
                       ("vorticity", vort)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{v:.17g}" for v in vals]
    lines.append("VECTORS velocity double")
    lines += [f"{u:.17g} {v:.17g} 0" for u, v in zip(-psi, psi)]
    return "\n".join(lines) + "\n"


@pytest.fixture
def artifact_dir(tmp_path):
    """A directory shaped like a full simulation output."""
    (tmp_path / "convergence.csv").write_text(
        "dt,error,rate\n1,0.1,\n0.5,0.025,2\n0.25,0.00625,2\n")
    (tmp_path / "chi_sweep.csv").write_text(
        "chi,error\n10,0.1\n100,0.0316\n1000,0.01\n")
    for chi in (10, 100):
        t = np.linspace(0, 1, 11)
        err = np.exp(-0.05 * chi * t) + 1e-9
        rows = "\n".join(f"{a:.17g},{b:.17g}" for a, b in zip(t, err))
        (tmp_path / f"decay_{chi}.csv").write_text("t,err\n" + rows + "\n")
    for case in ("dns_coriolis", "nudged_chi1"):
        y = np.linspace(0, 1, 12)
        nu = 1.0 + np.sin(np.pi * y)
        rows = "\n".join(f"{a:.17g},{b:.17g}" for a, b in zip(y, nu))
        (tmp_path / f"nusselt_{case}.csv").write_text("y,nu\n" + rows + "\n")
        shift = 0.0 if case.startswith("dns") else 0.1
        (tmp_path / f"fields_{case}.vtk").write_text(_vtk_text(case_shift=shift))
    return tmp_path

"""VTK and CSV artifact parsing."""
import numpy as np
import pytest

from nudge_plots.artifacts import ArtifactError, read_csv_columns, read_vtk


def test_read_vtk(artifact_dir):
    mesh = read_vtk(artifact_dir / "fields_dns_coriolis.vtk")
    assert mesh.points.shape == (25, 2)
    assert mesh.triangles.shape == (32, 3)
    assert set(mesh.point_scalars) == {"streamfunction", "temperature", "vorticity"}
    assert mesh.point_vectors["velocity"].shape == (25, 2)
    np.testing.assert_allclose(mesh.point_scalars["temperature"],
                               1.0 - mesh.points[:, 0], atol=1e-15)


def test_read_vtk_errors(tmp_path):
    with pytest.raises(ArtifactError, match="cannot read"):
        read_vtk(tmp_path / "missing.vtk")
    bad = tmp_path / "bad.vtk"
    bad.write_text("# vtk DataFile Version 3.0\nx\nASCII\nDATASET FOO\n")
    with pytest.raises(ArtifactError, match="POINTS"):
        read_vtk(bad)
    truncated = tmp_path / "trunc.vtk"
    truncated.write_text("POINTS 4 double\n0 0 0\n1 0 0\n")
    with pytest.raises(ArtifactError, match="truncated"):
        read_vtk(truncated)


def test_read_csv_columns(artifact_dir):
    data = read_csv_columns(artifact_dir / "convergence.csv",
                            required=("dt", "error"))
    np.testing.assert_allclose(data["dt"], [1.0, 0.5, 0.25])
    assert np.isnan(data["rate"][0]) and data["rate"][1] == 2.0


def test_read_csv_missing_column(artifact_dir):
    with pytest.raises(ArtifactError, match="lacks columns"):
        read_csv_columns(artifact_dir / "convergence.csv", required=("zz",))


def test_read_csv_missing_file(tmp_path):
    with pytest.raises(ArtifactError, match="cannot read"):
        read_csv_columns(tmp_path / "none.csv")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ArtifactError, match="empty"):
        read_csv_columns(empty)

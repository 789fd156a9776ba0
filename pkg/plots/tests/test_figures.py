"""Figure specs and rendering."""
import os

import pytest

from nudge_plots.artifacts import ArtifactError
from nudge_plots.figures import FigureSpec, render


def test_spec_validation(artifact_dir, tmp_path):
    with pytest.raises(ArtifactError, match="unknown figure kind"):
        FigureSpec(kind="pie", inputs=["x"], output="o.png").validate()
    with pytest.raises(ArtifactError, match="no inputs"):
        FigureSpec(kind="nusselt", inputs=[], output="o.png").validate()
    with pytest.raises(ArtifactError, match="missing input"):
        FigureSpec(kind="nusselt", inputs=[str(tmp_path / "nope.csv")],
                   output="o.png").validate()


def test_check_mode_parses_without_output(artifact_dir, tmp_path):
    out = tmp_path / "fig.png"
    spec = FigureSpec(kind="loglog-rate",
                      inputs=[str(artifact_dir / "chi_sweep.csv")],
                      output=str(out))
    assert render(spec, check_only=True) is None
    assert not out.exists()


def test_render_all_kinds(artifact_dir, tmp_path):
    specs = [
        FigureSpec(kind="loglog-rate",
                   inputs=[str(artifact_dir / "convergence.csv")],
                   output=str(tmp_path / "conv.png")),
        FigureSpec(kind="decay-series",
                   inputs=[str(artifact_dir / "decay_10.csv"),
                           str(artifact_dir / "decay_100.csv")],
                   output=str(tmp_path / "decay.png")),
        FigureSpec(kind="nusselt",
                   inputs=[str(artifact_dir / "nusselt_dns_coriolis.csv")],
                   output=str(tmp_path / "nu.png")),
        FigureSpec(kind="fields-triptych",
                   inputs=[str(artifact_dir / "fields_dns_coriolis.vtk")],
                   output=str(tmp_path / "fields.png"),
                   scales={"vorticity": (-20.0, 20.0)}),
    ]
    for spec in specs:
        path = render(spec)
        assert os.path.getsize(path) > 1000


def test_render_deterministic(artifact_dir, tmp_path):
    def once(name):
        out = tmp_path / name
        render(FigureSpec(kind="nusselt",
                          inputs=[str(artifact_dir / "nusselt_nudged_chi1.csv")],
                          output=str(out)))
        return out.read_bytes()

    assert once("a.png") == once("b.png")


def test_triptych_requires_fields(tmp_path, artifact_dir):
    bare = tmp_path / "bare.vtk"
    text = (artifact_dir / "fields_dns_coriolis.vtk").read_text()
    bare.write_text(text.split("POINT_DATA")[0])
    spec = FigureSpec(kind="fields-triptych", inputs=[str(bare)],
                      output=str(tmp_path / "x.png"))
    with pytest.raises(ArtifactError, match="missing from VTK"):
        render(spec)


def test_loglog_rejects_nonpositive(tmp_path):
    bad = tmp_path / "chi_sweep.csv"
    bad.write_text("chi,error\n10,0.0\n100,0.1\n")
    spec = FigureSpec(kind="loglog-rate", inputs=[str(bad)],
                      output=str(tmp_path / "x.png"))
    with pytest.raises(ArtifactError, match="positive"):
        render(spec)

"""Figure kinds and the render entry point.

Every figure is a pure function of its input artifacts: fixed color
maps, fixed contour level counts, and color scales that are either
given explicitly (so panels across a case family stay comparable) or
derived from the data of the single figure.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402
import numpy as np  # noqa: E402

from .artifacts import ArtifactError, read_csv_columns, read_vtk  # noqa: E402

KINDS = ("fields-triptych", "nusselt", "loglog-rate", "decay-series")

_CMAP = "viridis"
_N_ISOLINES = 15
_DPI = 150


@dataclass
class FigureSpec:
    """One figure: input artifacts, kind, output path, titles."""

    kind: str
    inputs: list
    output: str
    title: str = ""
    labels: list = field(default_factory=list)
    # optional fixed color scales: field name -> (vmin, vmax)
    scales: dict = field(default_factory=dict)

    def validate(self) -> "FigureSpec":
        if self.kind not in KINDS:
            raise ArtifactError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ArtifactError(f"figure {self.output}: no inputs")
        for p in self.inputs:
            if not os.path.isfile(p):
                raise ArtifactError(f"missing input artifact: {p}")
        return self


def _triangulation(mesh):
    return mtri.Triangulation(mesh.points[:, 0], mesh.points[:, 1],
                              mesh.triangles)


def _levels(values, scale):
    lo, hi = scale if scale is not None else (float(np.min(values)),
                                              float(np.max(values)))
    if hi - lo <= 1e-300:
        hi = lo + 1.0
    return np.linspace(lo, hi, _N_ISOLINES)


def _render_fields_triptych(spec: FigureSpec):
    mesh = read_vtk(spec.inputs[0])
    needed = ("streamfunction", "temperature", "vorticity")
    for name in needed:
        if name not in mesh.point_scalars:
            raise ArtifactError(
                f"{spec.inputs[0]}: field {name!r} missing from VTK data")
    tri = _triangulation(mesh)
    fig, axes = plt.subplots(1, 3, figsize=(12, 4), constrained_layout=True)
    for ax, name, label in zip(
            axes, needed, ("streamlines", "temperature", "vorticity")):
        vals = mesh.point_scalars[name]
        levels = _levels(vals, spec.scales.get(name))
        if name == "vorticity":
            m = ax.tricontourf(tri, vals, levels=levels, cmap=_CMAP,
                               extend="both")
            fig.colorbar(m, ax=ax, shrink=0.85)
        else:
            ax.tricontour(tri, vals, levels=levels, cmap=_CMAP)
        ax.set_title(label)
        ax.set_aspect("equal")
    fig.suptitle(spec.title or os.path.basename(spec.inputs[0]))
    return fig


def _render_nusselt(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6, 4.5), constrained_layout=True)
    labels = spec.labels or [os.path.basename(p) for p in spec.inputs]
    for path, label in zip(spec.inputs, labels):
        data = read_csv_columns(path, required=("y", "nu"))
        ax.plot(data["y"], data["nu"], label=label)
    ax.set_xlabel("y")
    ax.set_ylabel("local Nusselt number")
    ax.legend(fontsize=8)
    ax.set_title(spec.title or "local Nusselt number on the hot wall")
    return fig


def _render_loglog_rate(spec: FigureSpec):
    path = spec.inputs[0]
    data = read_csv_columns(path)
    for xcol in ("dt", "chi"):
        if xcol in data:
            break
    else:
        raise ArtifactError(f"{path}: expected a 'dt' or 'chi' column")
    if "error" not in data:
        raise ArtifactError(f"{path}: expected an 'error' column")
    x, err = data[xcol], data["error"]
    if np.any(x <= 0) or np.any(err <= 0):
        raise ArtifactError(f"{path}: log-log plot needs positive values")
    slope = float(np.polyfit(np.log(x), np.log(err), 1)[0])
    fig, ax = plt.subplots(figsize=(5.5, 4.5), constrained_layout=True)
    ax.loglog(x, err, "o-", label="error")
    ref = err[0] * (x / x[0]) ** slope
    ax.loglog(x, ref, "k--", label=f"fitted slope {slope:.2f}")
    ax.set_xlabel(xcol)
    ax.set_ylabel("error")
    ax.legend()
    ax.set_title(spec.title or os.path.basename(path))
    return fig


def _render_decay_series(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6, 4.5), constrained_layout=True)
    labels = spec.labels or [os.path.basename(p) for p in spec.inputs]
    for path, label in zip(spec.inputs, labels):
        data = read_csv_columns(path, required=("t", "err"))
        ax.semilogy(data["t"], data["err"], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("error norm")
    ax.legend(fontsize=8)
    ax.set_title(spec.title or "error decay")
    return fig


_RENDERERS = {
    "fields-triptych": _render_fields_triptych,
    "nusselt": _render_nusselt,
    "loglog-rate": _render_loglog_rate,
    "decay-series": _render_decay_series,
}


def render(spec: FigureSpec, check_only: bool = False):
    """Render one figure to spec.output; validate inputs only if asked."""
    spec.validate()
    if check_only:
        # parse everything so corrupt inputs fail here, then skip drawing
        for p in spec.inputs:
            if p.endswith(".vtk"):
                read_vtk(p)
            else:
                read_csv_columns(p)
        return None
    fig = _RENDERERS[spec.kind](spec)
    os.makedirs(os.path.dirname(spec.output) or ".", exist_ok=True)
    fig.savefig(spec.output, dpi=_DPI)
    plt.close(fig)
    return spec.output

"""render_all: turn a simulator output directory into PNG figures.

Discovers the artifact layout written by the simulation CLI
(convergence.csv, chi_sweep.csv, decay_<chi>.csv, nusselt_<case>.csv,
fields_<case>.vtk) and renders one figure per family.  Color scales for
the field triptychs are computed over the whole case family so DNS and
nudged panels are directly comparable.
"""
from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np

from .artifacts import ArtifactError, read_vtk
from .figures import FigureSpec, render

_FIELD_NAMES = ("streamfunction", "temperature", "vorticity")


def _case_name(path, prefix, suffix):
    return os.path.basename(path)[len(prefix):-len(suffix)]


def discover(out_dir) -> list[FigureSpec]:
    """Build the figure list for one output directory."""
    if not os.path.isdir(out_dir):
        raise ArtifactError(f"not a directory: {out_dir}")
    fig_dir = os.path.join(out_dir, "figures")
    specs = []

    for name, kind in (("convergence.csv", "loglog-rate"),
                       ("chi_sweep.csv", "loglog-rate")):
        path = os.path.join(out_dir, name)
        if os.path.isfile(path):
            specs.append(FigureSpec(
                kind=kind, inputs=[path],
                output=os.path.join(fig_dir, name.replace(".csv", ".png"))))

    decays = sorted(glob.glob(os.path.join(out_dir, "decay_*.csv")))
    if decays:
        labels = ["chi = " + _case_name(p, "decay_", ".csv") for p in decays]
        specs.append(FigureSpec(
            kind="decay-series", inputs=decays, labels=labels,
            output=os.path.join(fig_dir, "decay.png")))

    nusselts = sorted(glob.glob(os.path.join(out_dir, "nusselt_*.csv")))
    if nusselts:
        labels = [_case_name(p, "nusselt_", ".csv") for p in nusselts]
        specs.append(FigureSpec(
            kind="nusselt", inputs=nusselts, labels=labels,
            output=os.path.join(fig_dir, "nusselt.png")))

    vtks = sorted(glob.glob(os.path.join(out_dir, "fields_*.vtk")))
    if vtks:
        scales = _family_scales(vtks)
        for path in vtks:
            case = _case_name(path, "fields_", ".vtk")
            specs.append(FigureSpec(
                kind="fields-triptych", inputs=[path], title=case,
                scales=scales,
                output=os.path.join(fig_dir, f"fields_{case}.png")))
    return specs


def _family_scales(vtk_paths) -> dict:
    """Shared (vmin, vmax) per field over every case in the directory."""
    lo = {name: np.inf for name in _FIELD_NAMES}
    hi = {name: -np.inf for name in _FIELD_NAMES}
    for path in vtk_paths:
        mesh = read_vtk(path)
        for name in _FIELD_NAMES:
            if name in mesh.point_scalars:
                vals = mesh.point_scalars[name]
                lo[name] = min(lo[name], float(vals.min()))
                hi[name] = max(hi[name], float(vals.max()))
    return {name: (lo[name], hi[name])
            for name in _FIELD_NAMES if lo[name] <= hi[name]}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_all",
        description="Render PNG figures from a nudge-ns output directory")
    parser.add_argument("out_dir", help="simulation output directory")
    parser.add_argument("--check", action="store_true",
                        help="validate inputs and exit without rendering")
    args = parser.parse_args(argv)
    try:
        specs = discover(args.out_dir)
        if not specs:
            print(f"error: no renderable artifacts in {args.out_dir}",
                  file=sys.stderr)
            return 1
        for spec in specs:
            out = render(spec, check_only=args.check)
            if out is not None:
                print(out)
        if args.check:
            print(f"ok: {len(specs)} figure(s) validated")
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

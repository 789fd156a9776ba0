"""Readers for the simulator's output artifacts.

The plotting side never imports the simulator; everything arrives as
legacy ASCII VTK meshes and small CSV tables.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class ArtifactError(ValueError):
    """Missing or malformed input artifact."""


@dataclass
class VtkMesh:
    """Triangle mesh plus per-vertex fields from a legacy ASCII VTK file."""

    points: np.ndarray                 # (nv, 2); the z column is dropped
    triangles: np.ndarray              # (nt, 3)
    point_scalars: dict = field(default_factory=dict)   # name -> (nv,)
    point_vectors: dict = field(default_factory=dict)   # name -> (nv, 2)


def read_vtk(path) -> VtkMesh:
    try:
        with open(path) as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise ArtifactError(f"cannot read VTK file: {path}") from exc
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(tokens):
            raise ArtifactError(f"truncated VTK file: {path}")
        out = tokens[pos:pos + n]
        pos += n
        return out

    def seek(word):
        nonlocal pos
        while pos < len(tokens) and tokens[pos] != word:
            pos += 1
        if pos == len(tokens):
            raise ArtifactError(f"VTK section {word!r} missing: {path}")
        pos += 1

    try:
        seek("POINTS")
        nv = int(take(1)[0])
        take(1)  # dtype
        coords = np.array(take(3 * nv), dtype=float).reshape(nv, 3)

        seek("CELLS")
        nt = int(take(1)[0])
        take(1)  # total size
        cells = np.array(take(4 * nt), dtype=int).reshape(nt, 4)
        if np.any(cells[:, 0] != 3):
            raise ArtifactError(f"non-triangle cells in VTK file: {path}")
        mesh = VtkMesh(points=coords[:, :2], triangles=cells[:, 1:])

        while pos < len(tokens):
            tok = tokens[pos]
            pos += 1
            if tok == "SCALARS":
                name = take(1)[0]
                take(2)  # dtype, components
                take(2)  # LOOKUP_TABLE default
                mesh.point_scalars[name] = np.array(take(nv), dtype=float)
            elif tok == "VECTORS":
                name = take(1)[0]
                take(1)  # dtype
                vals = np.array(take(3 * nv), dtype=float).reshape(nv, 3)
                mesh.point_vectors[name] = vals[:, :2]
    except ArtifactError:
        raise
    except ValueError as exc:
        raise ArtifactError(f"malformed VTK file {path}: {exc}") from exc
    return mesh


def read_csv_columns(path, required=()) -> dict:
    """Read a small CSV into {column: float array}; blanks become NaN."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ArtifactError(f"empty CSV: {path}")
            rows = list(reader)
    except OSError as exc:
        raise ArtifactError(f"cannot read CSV: {path}") from exc
    missing = set(required) - set(reader.fieldnames)
    if missing:
        raise ArtifactError(f"CSV {path} lacks columns {sorted(missing)}")
    out = {}
    for name in reader.fieldnames:
        vals = [r[name] for r in rows]
        out[name] = np.array(
            [float(v) if v not in ("", None) else np.nan for v in vals])
    return out

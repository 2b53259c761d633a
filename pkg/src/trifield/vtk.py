"""Legacy ASCII VTK unstructured-grid output and a matching reader."""
from __future__ import annotations

import os
from typing import Dict, Tuple

import numpy as np

from .mesh import VTK_CELL_TYPES, Mesh

_KIND_OF_TYPE = {v: k for k, v in VTK_CELL_TYPES.items()}


def step_filename(prefix: str, step: int, width: int = 5) -> str:
    """``prefix_00007.vtk`` style name, zero-padded to ``width`` digits."""
    return f"{prefix}_{step:0{width}d}.vtk"


def _fmt(a) -> str:
    return " ".join("%.17g" % v for v in np.ravel(a))


def write_vtk(path: str, mesh: Mesh, point_data: Dict[str, np.ndarray], title: str = "trifield") -> str:
    """Write ``mesh`` with nodal arrays to ``path``.

    Arrays of shape ``(n,)`` become scalars and ``(n, nd)`` vectors (padded to
    three components). Other shapes are written as ``FIELD`` arrays.
    """
    n = mesh.n_nodes
    pts = np.zeros((n, 3))
    pts[:, : mesh.dim] = mesh.nodes
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [_fmt(p) for p in pts]
    nl = mesh.cells.shape[1]
    lines.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (nl + 1)}")
    lines += [f"{nl} " + " ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += [str(VTK_CELL_TYPES[mesh.kind])] * mesh.n_cells
    lines.append(f"POINT_DATA {n}")
    fields = []
    for name, arr in point_data.items():
        a = np.asarray(arr, dtype=float)
        if a.shape[0] != n:
            raise ValueError(f"point array {name!r} has {a.shape[0]} rows, mesh has {n} nodes")
        key = name.replace(" ", "_")
        if a.ndim == 1:
            lines += [f"SCALARS {key} double 1", "LOOKUP_TABLE default"] + ["%.17g" % v for v in a]
        elif a.ndim == 2 and a.shape[1] == mesh.dim:
            v = np.zeros((n, 3))
            v[:, : mesh.dim] = a
            lines += [f"VECTORS {key} double"] + [_fmt(r) for r in v]
        else:
            fields.append((key, a.reshape(n, -1)))
    if fields:
        lines.append(f"FIELD FieldData {len(fields)}")
        for key, a in fields:
            lines.append(f"{key} {a.shape[1]} {n} double")
            lines += [_fmt(r) for r in a]
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write VTK file: {exc.strerror}", path) from None
    return path


def read_vtk(path: str) -> Tuple[Mesh, Dict[str, np.ndarray]]:
    """Parse a file written by :func:`write_vtk`; returns the mesh (with the
    dimension inferred from the cell type) and the point arrays. Vectors are
    returned with three components."""
    with open(path, "r", encoding="ascii") as fh:
        tok = fh.read().split("\n")
    if not tok[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path}: not a legacy VTK file")
    if tok[2].strip() != "ASCII" or tok[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise ValueError(f"{path}: only ASCII unstructured grids are supported")
    i = 4
    n = int(tok[i].split()[1])
    pts = np.array([[float(v) for v in tok[i + 1 + k].split()] for k in range(n)])
    i += n + 1
    ne = int(tok[i].split()[1])
    cells = [[int(v) for v in tok[i + 1 + k].split()[1:]] for k in range(ne)]
    i += ne + 1
    types = {int(tok[i + 1 + k]) for k in range(ne)}
    i += ne + 1
    if len(types) != 1:
        raise ValueError(f"{path}: mixed cell types are not supported")
    kind = _KIND_OF_TYPE[types.pop()]
    dim = 3 if kind == "tet4" else 2
    data: Dict[str, np.ndarray] = {}
    if i < len(tok) and tok[i].startswith("POINT_DATA"):
        i += 1
    while i < len(tok):
        line = tok[i].split()
        if not line:
            i += 1
            continue
        if line[0] == "SCALARS":
            data[line[1]] = np.array([float(tok[i + 2 + k]) for k in range(n)])
            i += n + 2
        elif line[0] == "VECTORS":
            data[line[1]] = np.array([[float(v) for v in tok[i + 1 + k].split()] for k in range(n)])
            i += n + 1
        elif line[0] == "FIELD":
            nf = int(line[2])
            i += 1
            for _ in range(nf):
                name, nc, nt = tok[i].split()[:3]
                data[name] = np.array([[float(v) for v in tok[i + 1 + k].split()] for k in range(int(nt))])
                i += int(nt) + 1
        else:
            raise ValueError(f"{path}: unexpected section {line[0]!r}")
    mesh = Mesh(pts[:, :dim].copy(), np.array(cells, dtype=np.int64), kind)
    return mesh, data


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


__all__ = ["write_vtk", "read_vtk", "step_filename"]

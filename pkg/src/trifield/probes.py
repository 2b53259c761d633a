"""Point probes and their CSV time series."""
from __future__ import annotations

import csv
from typing import Dict, List, Sequence

import numpy as np

from .mesh import Mesh, locate
from .tensors import VOIGT_PAIRS

_AXES = "xyz"


def component_names(field: str, nd: int, kind: str) -> List[str]:
    """Column names of a nodal field: ``vector``, ``sym`` (stored symmetric
    components) or ``scalar``."""
    if kind == "vector":
        return [f"{field}_{_AXES[i]}" for i in range(nd)]
    if kind == "sym":
        return [f"{field}_{_AXES[i]}{_AXES[j]}" for i, j in VOIGT_PAIRS[nd]]
    return [field]


class PointProbe:
    """Interpolation at a point fixed in the mesh's parametrization.

    The point is located once (element and local coordinates at t=0); later
    samples follow the material point for a solid and the mesh point for an
    ALE fluid. At a mesh node the shape functions reduce to the nodal value.
    """

    def __init__(self, mesh: Mesh, point):
        self.point = np.asarray(point, dtype=float)
        self.element, self.xi = locate(mesh, self.point)
        N, _ = mesh.ref.eval(np.atleast_2d(self.xi))
        self.nodes = mesh.cells[self.element]
        self.weights = N[0]
        # exact nodal value when the point sits on a node
        on = np.isclose(self.weights, 1.0, rtol=0.0, atol=1e-12)
        if on.any():
            self.weights = on.astype(float)

    def sample(self, nodal) -> np.ndarray:
        a = np.asarray(nodal, dtype=float)
        return np.tensordot(self.weights, a[self.nodes], axes=1)


class ProbeSeries:
    """One CSV file per probe, header ``time,<components...>`` and one row per
    accepted step written in full double precision."""

    def __init__(self, path: str, columns: Sequence[str]):
        self.path = path
        self.columns = list(columns)
        self.last_time = -np.inf
        self.rows = 0
        with open(path, "w", newline="", encoding="ascii") as fh:
            csv.writer(fh).writerow(["time"] + self.columns)

    def append(self, t: float, values) -> None:
        v = np.ravel(np.asarray(values, dtype=float))
        if len(v) != len(self.columns):
            raise ValueError(f"{self.path}: got {len(v)} values for {len(self.columns)} columns")
        if not t > self.last_time:
            raise ValueError(f"{self.path}: time {t} does not increase (last {self.last_time})")
        with open(self.path, "a", newline="", encoding="ascii") as fh:
            csv.writer(fh).writerow([repr(float(t))] + [repr(float(x)) for x in v])
        self.last_time = t
        self.rows += 1


def read_probe_csv(path: str) -> Dict[str, np.ndarray]:
    """Columns of a probe file as float arrays keyed by header name."""
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]) if body else np.zeros((0, len(header)))
    return {h: data[:, k] for k, h in enumerate(header)}


__all__ = ["PointProbe", "ProbeSeries", "component_names", "read_probe_csv"]

"""Fluid mesh motion: harmonic extension of the interface displacement and
the mesh velocity used in the convective term."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvertedElementError, MeshMotionError
from .mesh import Mesh, element_geometry, quadrature_for


def stiffness_weighted_laplacian(mesh: Mesh, coords=None) -> sp.csr_matrix:
    """Scalar Laplacian with element weight ``1/|K|`` on ``coords``."""
    g = element_geometry(mesh, quadrature_for(mesh.kind, 2 * mesh.ref.order), coords)
    vol = g.wdetJ.sum(axis=1)
    Ke = np.einsum("eq,eqai,eqbi->eab", g.wdetJ, g.dNdx, g.dNdx) / vol[:, None, None]
    nl = mesh.cells.shape[1]
    rows = np.repeat(mesh.cells, nl, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, nl)).ravel()
    return sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))


class MeshMotion:
    """Extension of prescribed boundary displacements into the fluid mesh.

    ``moving`` are the interface nodes; ``fixed`` maps a displacement
    component to the nodes where that component is held at zero (a slip wall
    fixes only its normal component). The operator is built once on the
    initial mesh and factorized per component, so the map from interface data
    to the displacement field is linear.
    """

    def __init__(self, mesh: Mesh, moving: Sequence[int], fixed: Dict[int, Sequence[int]]):
        self.mesh = mesh
        self.X0 = mesh.nodes.copy()
        self.moving = np.asarray(moving, dtype=np.int64)
        nd = mesh.dim
        L = stiffness_weighted_laplacian(mesh, self.X0).tocsr()
        self._parts = []
        for c in range(nd):
            held = np.unique(np.concatenate([self.moving, np.asarray(fixed.get(c, []), dtype=np.int64)]))
            free = np.setdiff1d(np.arange(mesh.n_nodes), held)
            Lff = L[free][:, free].tocsc()
            Lfm = L[free][:, self.moving].tocsr()
            lu = spla.splu(Lff) if len(free) else None
            self._parts.append((free, lu, Lfm))
        self.disp = np.zeros((mesh.n_nodes, nd))
        self.disp_n = np.zeros((mesh.n_nodes, nd))
        self.velocity = np.zeros((mesh.n_nodes, nd))

    def extend(self, g) -> np.ndarray:
        """Displacement field for interface displacement ``g`` (n_moving, nd)."""
        g = np.asarray(g, dtype=float).reshape(len(self.moving), self.mesh.dim)
        out = np.zeros((self.mesh.n_nodes, self.mesh.dim))
        for c, (free, lu, Lfm) in enumerate(self._parts):
            out[self.moving, c] = g[:, c]
            if lu is not None and np.any(g[:, c]):
                out[free, c] = lu.solve(-(Lfm @ g[:, c]))
        return out

    def move(self, g, dt: Optional[float] = None, interface_velocity=None) -> np.ndarray:
        """Extend ``g``, move the mesh and update the mesh velocity.

        Raises :class:`MeshMotionError` when an element would invert.
        """
        disp = self.extend(g)
        x = self.X0 + disp
        try:
            element_geometry(self.mesh, coords=x)
        except InvertedElementError as exc:
            raise MeshMotionError(f"mesh motion tangles the fluid mesh: {exc}", elements=exc.elements) from None
        self.disp = disp
        self.mesh.nodes = x
        if dt is not None:
            self.velocity = mesh_velocity(disp, self.disp_n, dt)
            if interface_velocity is not None:
                self.velocity[self.moving] = interface_velocity
        return disp

    def commit(self):
        self.disp_n = self.disp.copy()


def solve_mesh_motion(mesh: Mesh, moving, g, fixed) -> np.ndarray:
    """One-shot extension; see :class:`MeshMotion`."""
    mm = MeshMotion(mesh, moving, fixed)
    disp = mm.extend(g)
    try:
        element_geometry(mesh, coords=mm.X0 + disp)
    except InvertedElementError as exc:
        raise MeshMotionError(str(exc), elements=exc.elements) from None
    return disp


def mesh_velocity(x_new, x_n, dt) -> np.ndarray:
    """Backward-difference nodal mesh velocity."""
    return (np.asarray(x_new, dtype=float) - np.asarray(x_n, dtype=float)) / dt

"""Degree-of-freedom maps, sparse assembly, constraints and linear solves."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, SolverError
from .mesh import Mesh, default_degree, element_geometry, quadrature_for


def n_sym(nd: int) -> int:
    return nd * (nd + 1) // 2


def three_field_layout(nd: int) -> Dict[str, int]:
    """Component counts of the (vector, symmetric tensor, scalar) unknown."""
    return {"v": nd, "s": n_sym(nd), "p": 1}


class DofMap:
    """Node-major interleaved numbering: dof = node * ncomp + offset + comp.

    ``fields`` maps a field name to its component count, in storage order.
    """

    def __init__(self, n_nodes: int, fields: Dict[str, int]):
        self.n_nodes = int(n_nodes)
        self.fields = dict(fields)
        self.offset = {}
        off = 0
        for name, nc in self.fields.items():
            self.offset[name] = off
            off += nc
        self.ncomp = off
        self.n_dof = self.n_nodes * self.ncomp
        self.constraints: Dict[int, float] = {}

    def dofs(self, name: str, nodes=None, comp=None) -> np.ndarray:
        """Global indices of ``name`` at ``nodes``; shape (len(nodes), ncomp_field)
        or (len(nodes),) when ``comp`` is given."""
        if name not in self.fields:
            raise KeyError(f"unknown field {name!r}")
        nodes = np.arange(self.n_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
        if nodes.size and (nodes.min() < 0 or nodes.max() >= self.n_nodes):
            raise AssemblyError("node index out of range")
        base = nodes[:, None] * self.ncomp + self.offset[name]
        if comp is None:
            return base + np.arange(self.fields[name])[None, :]
        if not 0 <= comp < self.fields[name]:
            raise AssemblyError(f"component {comp} out of range for field {name!r}")
        return base[:, 0] + comp

    def field_view(self, x: np.ndarray, name: str) -> np.ndarray:
        """Nodal array ``(n_nodes, ncomp_field)`` for one field (a copy)."""
        X = np.asarray(x).reshape(self.n_nodes, self.ncomp)
        o = self.offset[name]
        return X[:, o:o + self.fields[name]].copy()

    def set_field(self, x: np.ndarray, name: str, values) -> None:
        X = x.reshape(self.n_nodes, self.ncomp)
        o = self.offset[name]
        X[:, o:o + self.fields[name]] = np.asarray(values).reshape(self.n_nodes, -1)

    def constrain(self, dofs, values=0.0) -> None:
        dofs = np.atleast_1d(np.asarray(dofs, dtype=np.int64)).ravel()
        values = np.broadcast_to(np.asarray(values, dtype=float).ravel() if np.ndim(values) else values,
                                 dofs.shape)
        if dofs.size and (dofs.min() < 0 or dofs.max() >= self.n_dof):
            raise AssemblyError("constrained dof out of range")
        for d, v in zip(dofs.tolist(), values.tolist()):
            self.constraints[d] = v

    def clear_constraints(self) -> None:
        self.constraints = {}

    def constraint_arrays(self):
        if not self.constraints:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        k = np.fromiter(self.constraints.keys(), dtype=np.int64)
        v = np.fromiter(self.constraints.values(), dtype=float)
        order = np.argsort(k)
        return k[order], v[order]

    def element_dofs(self, cells: np.ndarray) -> np.ndarray:
        """(ne, nloc * ncomp) element dof table in node-major local order."""
        return (cells[:, :, None] * self.ncomp + np.arange(self.ncomp)[None, None, :]).reshape(len(cells), -1)


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray


@dataclass
class SolverReport:
    converged: bool
    iterations: int
    residual: float
    seconds: float = 0.0
    message: str = ""


class Assembler:
    """Scatter-add of dense element blocks into a fixed CSR pattern.

    The pattern and the map from each local entry to its CSR slot are built
    once, so each assembly is a single ``bincount``.
    """

    def __init__(self, edofs: np.ndarray, n_dof: int):
        edofs = np.asarray(edofs, dtype=np.int64)
        if edofs.size and (edofs.min() < 0 or edofs.max() >= n_dof):
            raise AssemblyError("element dof index out of range")
        self.edofs = edofs
        self.n_dof = int(n_dof)
        ne, nl = edofs.shape
        rows = np.broadcast_to(edofs[:, :, None], (ne, nl, nl)).ravel()
        cols = np.broadcast_to(edofs[:, None, :], (ne, nl, nl)).ravel()
        diag = np.arange(self.n_dof, dtype=np.int64)
        keys = np.concatenate([rows * self.n_dof + cols, diag * self.n_dof + diag])
        uniq, inv = np.unique(keys, return_inverse=True)
        self.slot = inv[: rows.size].reshape(ne, nl * nl)
        self.nnz = len(uniq)
        r, c = np.divmod(uniq, self.n_dof)
        self.indices = c.astype(np.int32)
        self.indptr = np.searchsorted(r, np.arange(self.n_dof + 1)).astype(np.int32)
        self.row_of = r
        self.diag_slot = np.searchsorted(uniq, diag * self.n_dof + diag)

    def matrix(self, Ke: np.ndarray, elements: Optional[np.ndarray] = None) -> sp.csr_matrix:
        return self._csr(self.values(Ke, elements))

    def values(self, Ke: np.ndarray, elements: Optional[np.ndarray] = None) -> np.ndarray:
        Ke = np.asarray(Ke, dtype=float)
        slot = self.slot if elements is None else self.slot[elements]
        if Ke.shape[0] != slot.shape[0] or Ke[0].size != slot.shape[1]:
            raise AssemblyError(f"element matrices {Ke.shape} do not match the dof table")
        return np.bincount(slot.ravel(), weights=Ke.ravel(), minlength=self.nnz)

    def values_parallel(self, Ke: np.ndarray, workers: int = 4) -> np.ndarray:
        """Partitioned assembly: each worker scatters a contiguous element range."""
        Ke = np.asarray(Ke, dtype=float)
        parts = np.array_split(np.arange(len(Ke)), workers)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(lambda idx: self.values(Ke[idx], idx), parts))
        return np.sum(chunks, axis=0)

    def vector(self, Re: np.ndarray, elements: Optional[np.ndarray] = None) -> np.ndarray:
        ed = self.edofs if elements is None else self.edofs[elements]
        return np.bincount(ed.ravel(), weights=np.asarray(Re, float).ravel(), minlength=self.n_dof)

    def _csr(self, data) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n_dof, self.n_dof))


def assemble(edofs, Ke, Re=None, n_dof=None, assembler: Optional[Assembler] = None) -> SparseSystem:
    """One-shot assembly of element matrices (and vectors) into a SparseSystem."""
    edofs = np.asarray(edofs, dtype=np.int64)
    if assembler is None:
        n_dof = int(edofs.max()) + 1 if n_dof is None else n_dof
        assembler = Assembler(edofs, n_dof)
    A = assembler.matrix(Ke)
    b = assembler.vector(Re) if Re is not None else np.zeros(assembler.n_dof)
    return SparseSystem(A, b)


def apply_dirichlet(system: SparseSystem, dofs, values) -> SparseSystem:
    """Row replacement with symmetric column elimination into the rhs.

    Constrained rows and columns are zeroed, the diagonal set to one and the
    rhs entry to the prescribed value; returns a new system.
    """
    A = system.matrix.tocsr()
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    b = np.array(system.rhs, dtype=float, copy=True)
    if dofs.size == 0:
        return SparseSystem(A.copy(), b)
    x = np.zeros(A.shape[0])
    x[dofs] = values
    b -= A @ x
    fixed = np.zeros(A.shape[0], dtype=bool)
    fixed[dofs] = True
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    data = A.data.copy()
    data[fixed[rows] | fixed[A.indices]] = 0.0
    A = sp.csr_matrix((data, A.indices.copy(), A.indptr.copy()), shape=A.shape)
    A = A + sp.csr_matrix((np.ones(dofs.size), (dofs, dofs)), shape=A.shape)
    b[dofs] = values
    return SparseSystem(A.tocsr(), b)


class DirichletMasker:
    """Fast repeated constraint application on a fixed CSR pattern."""

    def __init__(self, assembler: Assembler, dofs):
        self.asm = assembler
        self.dofs = np.asarray(dofs, dtype=np.int64)
        fixed = np.zeros(assembler.n_dof, dtype=bool)
        fixed[self.dofs] = True
        self.zero = fixed[assembler.row_of] | fixed[assembler.indices]
        self.fixed = fixed

    def apply(self, data: np.ndarray, rhs: np.ndarray, values) -> SparseSystem:
        """Constrain the system ``(data, rhs)`` to ``x[dofs] = values``."""
        b = np.array(rhs, dtype=float, copy=True)
        vals = np.broadcast_to(np.asarray(values, float), self.dofs.shape)
        if self.dofs.size:
            x = np.zeros(self.asm.n_dof)
            x[self.dofs] = vals
            b -= self.asm._csr(data) @ x
        d = data.copy()
        d[self.zero] = 0.0
        d[self.asm.diag_slot[self.dofs]] = 1.0
        b[self.dofs] = vals
        return SparseSystem(self.asm._csr(d), b)


@dataclass
class LinearSolverConfig:
    tol: float = 1e-10
    method: str = "direct"
    max_refine: int = 3
    maxiter: int = 2000
    # threshold partial pivoting favouring the fill-reducing order
    pivot_threshold: float = 0.01
    ordering: str = "MMD_AT_PLUS_A"


def solve_linear(system: SparseSystem, cfg: Optional[LinearSolverConfig] = None):
    """Solve ``A x = b``; returns ``(x, SolverReport)``.

    Direct LU with a few steps of iterative refinement; ``method='gmres'``
    uses ILU-preconditioned GMRES instead. Raises :class:`SolverError` when
    the matrix is singular or the result is not finite.
    """
    cfg = cfg or LinearSolverConfig()
    A = system.matrix.tocsc()
    b = np.asarray(system.rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise SolverError(f"incompatible system shapes {A.shape} and {b.shape}")
    if not np.all(np.isfinite(b)):
        raise SolverError("rhs is not finite", SolverReport(False, 0, np.inf))
    t0 = time.perf_counter()
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros_like(b), SolverReport(True, 0, 0.0, 0.0)
    if cfg.method == "gmres":
        x, its = _gmres(A, b, cfg)
    else:
        try:
            lu = spla.splu(A, permc_spec=cfg.ordering, diag_pivot_thresh=cfg.pivot_threshold)
        except RuntimeError as exc:
            rep = SolverReport(False, 0, np.inf, time.perf_counter() - t0, str(exc))
            raise SolverError(f"singular matrix: {exc}", rep) from None
        x = lu.solve(b)
        its = 1
        for _ in range(cfg.max_refine):
            r = b - A @ x
            if not np.all(np.isfinite(r)) or np.linalg.norm(r) <= cfg.tol * bn:
                break
            x = x + lu.solve(r)
            its += 1
    if not np.all(np.isfinite(x)):
        rep = SolverReport(False, its, np.inf, time.perf_counter() - t0, "non-finite solution")
        raise SolverError("singular matrix: non-finite solution", rep)
    res = float(np.linalg.norm(b - A @ x) / bn)
    return x, SolverReport(res <= cfg.tol, its, res, time.perf_counter() - t0)


class ReusableFactorization:
    """LU factors kept across a sequence of nearby matrices.

    The first :meth:`solve` (or one after :meth:`reset`) factorizes; later
    calls run GMRES preconditioned with the stored factors and refactorize
    only when that fails to reach the tolerance within ``max_krylov``
    iterations.
    """

    def __init__(self, cfg: Optional[LinearSolverConfig] = None, max_krylov: int = 25):
        self.cfg = cfg or LinearSolverConfig()
        self.max_krylov = max_krylov
        self.lu = None
        self.factorizations = 0

    def reset(self):
        self.lu = None

    def solve(self, system: SparseSystem):
        A = system.matrix.tocsc()
        b = np.asarray(system.rhs, dtype=float)
        bn = np.linalg.norm(b)
        if bn == 0.0:
            return np.zeros_like(b), SolverReport(True, 0, 0.0)
        if self.lu is not None:
            t0 = time.perf_counter()
            M = spla.LinearOperator(A.shape, self.lu.solve)
            count = [0]

            def cb(_):
                count[0] += 1

            # acceptance is judged on the true residual; gmres itself stops on
            # the preconditioned one and may flag a marginal miss
            x, _ = spla.gmres(A, b, x0=self.lu.solve(b), M=M, rtol=self.cfg.tol, atol=0.0,
                              restart=self.max_krylov, maxiter=2, callback=cb, callback_type="pr_norm")
            res = float(np.linalg.norm(b - A @ x) / bn)
            if res <= 10.0 * self.cfg.tol and np.all(np.isfinite(x)):
                return x, SolverReport(True, count[0], res, time.perf_counter() - t0)
        try:
            self.lu = spla.splu(A, permc_spec=self.cfg.ordering, diag_pivot_thresh=self.cfg.pivot_threshold)
        except RuntimeError as exc:
            raise SolverError(f"singular matrix: {exc}", SolverReport(False, 0, np.inf, 0.0, str(exc))) from None
        self.factorizations += 1
        x = self.lu.solve(b)
        for _ in range(self.cfg.max_refine):
            r = b - A @ x
            if np.linalg.norm(r) <= self.cfg.tol * bn:
                break
            x = x + self.lu.solve(r)
        if not np.all(np.isfinite(x)):
            raise SolverError("singular matrix: non-finite solution", SolverReport(False, 1, np.inf))
        res = float(np.linalg.norm(b - A @ x) / bn)
        return x, SolverReport(res <= self.cfg.tol, 1, res)


def _gmres(A, b, cfg):
    ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
    M = spla.LinearOperator(A.shape, ilu.solve)
    count = [0]

    def cb(_):
        count[0] += 1

    x, _ = spla.gmres(A, b, M=M, rtol=cfg.tol, atol=0.0, restart=200, maxiter=cfg.maxiter,
                      callback=cb, callback_type="pr_norm")
    return x, count[0]


def l2_norm(values, mesh: Mesh, coords=None, degree: Optional[int] = None) -> float:
    """``(int |f|^2 dx)^(1/2)`` of a nodal field interpolated on ``mesh``."""
    f = np.asarray(values, dtype=float)
    if f.shape[0] != mesh.n_nodes:
        raise ValueError("field must be defined on all nodes")
    f = f.reshape(mesh.n_nodes, -1)
    quad = quadrature_for(mesh.kind, degree or default_degree(mesh.ref))
    g = element_geometry(mesh, quad, coords)
    fq = np.einsum("qa,eak->eqk", g.N, f[mesh.cells])
    return float(np.sqrt(np.sum(g.wdetJ * np.sum(fq ** 2, axis=-1))))


def l2_error(values, exact, mesh: Mesh, coords=None, degree: Optional[int] = None) -> float:
    """L2 distance between a nodal field and a callable ``exact(x) -> (nq, k)``."""
    coords = mesh.nodes if coords is None else coords
    f = np.asarray(values, dtype=float).reshape(mesh.n_nodes, -1)
    quad = quadrature_for(mesh.kind, degree or max(2 * default_degree(mesh.ref), 4))
    g = element_geometry(mesh, quad, coords)
    xq = np.einsum("qa,eai->eqi", g.N, coords[mesh.cells])
    fq = np.einsum("qa,eak->eqk", g.N, f[mesh.cells])
    ex = np.asarray(exact(xq.reshape(-1, mesh.dim)), dtype=float).reshape(fq.shape)
    return float(np.sqrt(np.sum(g.wdetJ * np.sum((fq - ex) ** 2, axis=-1))))


def lumped_mass(mesh: Mesh, coords=None) -> np.ndarray:
    """Row-sum lumped nodal mass of the scalar P-interpolation."""
    g = element_geometry(mesh, coords=coords)
    m = np.zeros(mesh.n_nodes)
    np.add.at(m, mesh.cells, np.einsum("qa,eq->ea", g.N, g.wdetJ))
    return m


__all__ = ["DofMap", "SparseSystem", "SolverReport", "Assembler", "assemble", "apply_dirichlet",
           "DirichletMasker", "LinearSolverConfig", "ReusableFactorization", "solve_linear", "l2_norm", "l2_error",
           "lumped_mass", "n_sym", "three_field_layout"]

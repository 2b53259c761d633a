"""Unstructured meshes, reference elements, quadrature and geometric maps.

Supported element kinds: ``tri3`` (P1), ``tri6`` (P2), ``quad4`` (Q1) and
``tet4`` (P1 tetrahedron). Boundary faces use the matching lower-dimensional
kinds ``line2``, ``line3`` and ``tri3``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

from .errors import ConfigError, DomainError, InvertedElementError, MeshError

_XI_TOL = 1e-12


# --------------------------------------------------------------------------
# reference elements
# --------------------------------------------------------------------------

def _tri3(x):
    x = np.atleast_2d(x)
    r, s = x[:, 0], x[:, 1]
    N = np.stack([1.0 - r - s, r, s], axis=1)
    dN = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(x), 3, 2)).copy()
    return N, dN


def _tri6(x):
    x = np.atleast_2d(x)
    L = np.stack([1.0 - x[:, 0] - x[:, 1], x[:, 0], x[:, 1]], axis=1)
    dL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    N = np.empty((len(x), 6))
    dN = np.empty((len(x), 6, 2))
    for i in range(3):
        N[:, i] = L[:, i] * (2.0 * L[:, i] - 1.0)
        dN[:, i] = (4.0 * L[:, i] - 1.0)[:, None] * dL[i]
    for k, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        N[:, 3 + k] = 4.0 * L[:, a] * L[:, b]
        dN[:, 3 + k] = 4.0 * (L[:, a, None] * dL[b] + L[:, b, None] * dL[a])
    return N, dN


_QUAD_NODES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _quad4(x):
    x = np.atleast_2d(x)
    r, s = x[:, :1], x[:, 1:2]
    a, b = _QUAD_NODES[:, 0], _QUAD_NODES[:, 1]
    N = 0.25 * (1.0 + r * a) * (1.0 + s * b)
    dN = np.stack([0.25 * a * (1.0 + s * b), 0.25 * b * (1.0 + r * a)], axis=2)
    return N, dN


def _tet4(x):
    x = np.atleast_2d(x)
    N = np.stack([1.0 - x[:, 0] - x[:, 1] - x[:, 2], x[:, 0], x[:, 1], x[:, 2]], axis=1)
    g = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return N, np.broadcast_to(g, (len(x), 4, 3)).copy()


def _line2(x):
    t = np.atleast_2d(x)[:, 0]
    N = np.stack([1.0 - t, t], axis=1)
    dN = np.broadcast_to(np.array([[-1.0], [1.0]]), (len(t), 2, 1)).copy()
    return N, dN


def _line3(x):
    t = np.atleast_2d(x)[:, 0]
    N = np.stack([(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)], axis=1)
    dN = np.stack([4.0 * t - 3.0, 4.0 * t - 1.0, 4.0 - 8.0 * t], axis=1)[:, :, None]
    return N, dN


@dataclass(frozen=True)
class RefElement:
    kind: str
    dim: int
    order: int
    nodes: np.ndarray = field(repr=False)
    n_vertices: int
    faces: tuple = field(repr=False)
    face_kind: Optional[str]
    geometry: str  # simplex | cube
    _basis: Callable = field(repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def contains(self, xi, tol=_XI_TOL) -> bool:
        xi = np.asarray(xi, dtype=float)
        if self.geometry == "cube":
            return bool(np.all(np.abs(xi) <= 1.0 + tol))
        return bool(np.all(xi >= -tol) and xi.sum() <= 1.0 + tol)

    def eval(self, points):
        """Values ``(nq, n)`` and reference gradients ``(nq, n, dim)``."""
        return self._basis(np.asarray(points, dtype=float).reshape(-1, self.dim))

    def measure(self) -> float:
        if self.geometry == "cube":
            return 2.0 ** self.dim
        return 1.0 / {1: 1, 2: 2, 3: 6}[self.dim]


_REF = {
    "line2": RefElement("line2", 1, 1, np.array([[0.0], [1.0]]), 2, (), None, "simplex", _line2),
    "line3": RefElement("line3", 1, 2, np.array([[0.0], [1.0], [0.5]]), 2, (), None, "simplex", _line3),
    "tri3": RefElement("tri3", 2, 1, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 3,
                       ((0, 1), (1, 2), (2, 0)), "line2", "simplex", _tri3),
    "tri6": RefElement("tri6", 2, 2,
                       np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]), 3,
                       ((0, 1, 3), (1, 2, 4), (2, 0, 5)), "line3", "simplex", _tri6),
    "quad4": RefElement("quad4", 2, 1, _QUAD_NODES.copy(), 4,
                        ((0, 1), (1, 2), (2, 3), (3, 0)), "line2", "cube", _quad4),
    "tet4": RefElement("tet4", 3, 1, np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]), 4,
                       ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)), "tri3", "simplex", _tet4),
}

VTK_CELL_TYPES = {"tri3": 5, "tri6": 22, "quad4": 9, "tet4": 10, "line2": 3, "line3": 21}


def ref_element(kind: str) -> RefElement:
    try:
        return _REF[kind]
    except KeyError:
        raise ConfigError(f"unknown element kind {kind!r}") from None


def shape_eval(ref: RefElement, xi):
    """Evaluate the Lagrange basis of ``ref`` at one reference point."""
    xi = np.asarray(xi, dtype=float).reshape(ref.dim)
    if not ref.contains(xi):
        raise DomainError(f"point {xi.tolist()} lies outside the {ref.kind} reference element")
    N, dN = ref.eval(xi)
    return N[0], dN[0]


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _collapsed_simplex(dim, degree):
    # Duffy/Stroud conical product rule; positive weights, exact to `degree`.
    n = int(ceil((degree + dim) / 2.0))
    pts, wts = [], []
    if dim == 2:
        t, wt = _gauss01(n)
        for a, wa in zip(t, wt):
            for b, wb in zip(t, wt):
                pts.append([a * (1.0 - b), b])
                wts.append(wa * wb * (1.0 - b))
    else:
        t, wt = _gauss01(n)
        for a, wa in zip(t, wt):
            for b, wb in zip(t, wt):
                for c, wc in zip(t, wt):
                    pts.append([a * (1.0 - b) * (1.0 - c), b * (1.0 - c), c])
                    wts.append(wa * wb * wc * (1.0 - b) * (1.0 - c) ** 2)
    return np.array(pts), np.array(wts)


_TRI_RULES = {
    1: (np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5])),
    2: (np.array([[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]]),
        np.full(3, 1.0 / 6.0)),
}


def _dunavant4():
    a, b = 0.445948490915965, 0.091576213509771
    wa, wb = 0.223381589678011, 0.109951743655322
    pts = [[a, a], [1 - 2 * a, a], [a, 1 - 2 * a], [b, b], [1 - 2 * b, b], [b, 1 - 2 * b]]
    return np.array(pts), 0.5 * np.array([wa] * 3 + [wb] * 3)


@lru_cache(maxsize=None)
def quadrature_for(kind: str, degree: int) -> QuadratureRule:
    """Quadrature rule on the reference element of ``kind`` exact to ``degree``."""
    if degree < 1 or int(degree) != degree:
        raise ConfigError(f"quadrature degree must be a positive integer, got {degree!r}")
    if degree > 20:
        raise ConfigError(f"unsupported quadrature degree {degree}")
    ref = ref_element(kind)
    if ref.dim == 1:
        t, w = _gauss01(int(ceil((degree + 1) / 2.0)))
        return QuadratureRule(t[:, None], w, degree)
    if ref.geometry == "cube":
        x, w = np.polynomial.legendre.leggauss(int(ceil((degree + 1) / 2.0)))
        X, Y = np.meshgrid(x, x, indexing="ij")
        return QuadratureRule(np.c_[X.ravel(), Y.ravel()], np.outer(w, w).ravel(), degree)
    if ref.dim == 2:
        if degree in _TRI_RULES:
            p, w = _TRI_RULES[degree]
        elif degree <= 4:
            p, w = _dunavant4()
        else:
            p, w = _collapsed_simplex(2, degree)
        return QuadratureRule(p, w, degree)
    if degree == 1:
        return QuadratureRule(np.array([[0.25, 0.25, 0.25]]), np.array([1.0 / 6.0]), 1)
    if degree == 2:
        a, b = 0.5854101966249685, 0.1381966011250105
        p = np.array([[b, b, b], [a, b, b], [b, a, b], [b, b, a]])
        return QuadratureRule(p, np.full(4, 1.0 / 24.0), 2)
    p, w = _collapsed_simplex(3, degree)
    return QuadratureRule(p, w, degree)


def default_degree(ref: RefElement) -> int:
    return 2 * ref.order


# --------------------------------------------------------------------------
# mesh
# --------------------------------------------------------------------------

@dataclass
class Mesh:
    """Single-kind unstructured mesh.

    ``boundary`` maps a tag to an ``(F, 2)`` integer array of
    ``(element, local face)`` pairs.
    """

    nodes: np.ndarray
    cells: np.ndarray
    kind: str
    boundary: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        self.ref = ref_element(self.kind)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.ref.dim:
            raise MeshError(f"{self.kind} mesh needs {self.ref.dim}D nodes, got shape {self.nodes.shape}")
        if self.cells.ndim != 2 or self.cells.shape[1] != self.ref.n_nodes:
            raise MeshError(f"{self.kind} connectivity must have {self.ref.n_nodes} columns")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= len(self.nodes)):
            raise MeshError("connectivity references a node that does not exist")
        self.boundary = {k: np.asarray(v, dtype=np.int64).reshape(-1, 2) for k, v in self.boundary.items()}

    @property
    def dim(self) -> int:
        return self.ref.dim

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def copy(self) -> "Mesh":
        return Mesh(self.nodes.copy(), self.cells.copy(), self.kind,
                    {k: v.copy() for k, v in self.boundary.items()})

    def face_nodes(self, tag: str) -> np.ndarray:
        """Node indices ``(F, n_face_nodes)`` of the faces carrying ``tag``."""
        faces = self.boundary[tag]
        local = np.array(self.ref.faces)
        return self.cells[faces[:, 0][:, None], local[faces[:, 1]]]

    def boundary_nodes(self, *tags: str) -> np.ndarray:
        if not tags:
            tags = tuple(self.boundary)
        out = [self.face_nodes(t).ravel() for t in tags if t in self.boundary]
        return np.unique(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)

    def diameters(self, coords=None) -> np.ndarray:
        return element_diameters(self, coords)

    def validate(self):
        """Check the structural invariants; raises :class:`MeshError`."""
        seen = {}
        for tag, faces in self.boundary.items():
            for e, f in faces:
                if not (0 <= e < self.n_cells and 0 <= f < len(self.ref.faces)):
                    raise MeshError(f"boundary set {tag!r} references invalid face ({e}, {f})")
                key = (int(e), int(f))
                if key in seen and seen[key] != tag:
                    raise MeshError(f"face {key} tagged both {seen[key]!r} and {tag!r}")
                seen[key] = tag
        # a boundary face must not be shared with a neighbouring element
        counts = _face_counts(self)
        for tag, faces in self.boundary.items():
            for e, f in faces:
                if counts[_face_key(self, e, f)] != 1:
                    raise MeshError(f"face ({e}, {f}) in {tag!r} is interior")
        element_geometry(self, quadrature_for(self.kind, default_degree(self.ref)))
        return self


def _face_key(mesh, e, f):
    return tuple(sorted(mesh.cells[e, list(mesh.ref.faces[f])[: mesh.ref.dim]].tolist()))


def _face_counts(mesh):
    counts = {}
    for e in range(mesh.n_cells):
        for f in range(len(mesh.ref.faces)):
            k = _face_key(mesh, e, f)
            counts[k] = counts.get(k, 0) + 1
    return counts


def exterior_faces(mesh: Mesh) -> np.ndarray:
    """All ``(element, local face)`` pairs that lie on the domain boundary."""
    nv = mesh.ref.dim  # vertices per face for the supported kinds
    local = np.array([f[:nv] for f in mesh.ref.faces])
    verts = np.sort(mesh.cells[:, local], axis=2).reshape(-1, nv)
    _, inv, cnt = np.unique(verts, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    idx = np.nonzero(cnt[inv] == 1)[0]
    nf = len(mesh.ref.faces)
    return np.c_[idx // nf, idx % nf]


def tag_boundary(mesh: Mesh, predicates: Dict[str, Callable], default: Optional[str] = None) -> Mesh:
    """Assign exterior faces to tags by testing predicates on face centroids.

    The first matching predicate wins; unmatched faces go to ``default``.
    """
    faces = exterior_faces(mesh)
    local = np.array(mesh.ref.faces)
    cent = mesh.nodes[mesh.cells[faces[:, 0][:, None], local[faces[:, 1]]]].mean(axis=1)
    taken = np.zeros(len(faces), dtype=bool)
    out = {}
    for tag, pred in predicates.items():
        hit = np.array([bool(pred(c)) for c in cent], dtype=bool) & ~taken
        taken |= hit
        if hit.any():
            out[tag] = faces[hit]
    if default is not None and (~taken).any():
        out[default] = faces[~taken]
    mesh.boundary = out
    return mesh


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------

def geometry_map(mesh: Mesh, elem: int, xi, coords=None):
    """Physical point, Jacobian, its determinant and inverse at ``xi``."""
    coords = mesh.nodes if coords is None else coords
    if not 0 <= elem < mesh.n_cells:
        raise MeshError(f"element {elem} out of range")
    N, dN = mesh.ref.eval(xi)
    X = coords[mesh.cells[elem]]
    x = N[0] @ X
    Jg = X.T @ dN[0]
    det = float(np.linalg.det(Jg))
    if not det > 0.0:
        raise InvertedElementError(f"element {elem} has non-positive Jacobian {det:.3e}", elements=[elem])
    return x, Jg, det, np.linalg.inv(Jg)


def det_inv(J):
    """Determinant and inverse of a stack of 1x1, 2x2 or 3x3 matrices in
    closed form (much cheaper than the LAPACK loop for tiny matrices).
    The inverse is only meaningful where the determinant is nonzero."""
    n = J.shape[-1]
    if n == 1:
        det = J[..., 0, 0]
        return det, 1.0 / np.where(det == 0.0, 1.0, det)[..., None, None]
    if n == 2:
        a, b, c, d = J[..., 0, 0], J[..., 0, 1], J[..., 1, 0], J[..., 1, 1]
        det = a * d - b * c
        adj = np.stack([np.stack([d, -b], -1), np.stack([-c, a], -1)], -2)
    elif n == 3:
        c0, c1, c2 = J[..., :, 0], J[..., :, 1], J[..., :, 2]
        r0, r1, r2 = np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)
        det = np.einsum("...i,...i->...", c0, r0)
        adj = np.stack([r0, r1, r2], -2)
    else:
        return np.linalg.det(J), np.linalg.inv(J)
    safe = np.where(det == 0.0, 1.0, det)
    return det, adj / safe[..., None, None]


@dataclass
class ElementGeometry:
    N: np.ndarray      # (nq, nloc)
    dNdx: np.ndarray   # (ne, nq, nloc, nd)
    detJ: np.ndarray   # (ne, nq)
    wdetJ: np.ndarray  # (ne, nq)
    quad: QuadratureRule


def element_geometry(mesh: Mesh, quad: Optional[QuadratureRule] = None, coords=None,
                     check=True) -> ElementGeometry:
    """Shape-function data at quadrature points of every element."""
    coords = mesh.nodes if coords is None else coords
    quad = quad or quadrature_for(mesh.kind, default_degree(mesh.ref))
    N, dN = mesh.ref.eval(quad.points)
    X = coords[mesh.cells]                          # (ne, nloc, nd)
    Jg = np.einsum("eai,qaj->eqij", X, dN)
    det, inv = det_inv(Jg)
    if check and not np.all(det > 0.0):
        bad = np.unique(np.nonzero(~(det > 0.0))[0])
        raise InvertedElementError(
            f"{len(bad)} element(s) with non-positive Jacobian (min {det.min():.3e})", elements=bad.tolist())
    dNdx = np.einsum("qaj,eqjm->eqam", dN, inv)
    return ElementGeometry(N, dNdx, det, det * quad.weights[None, :], quad)


def element_diameters(mesh: Mesh, coords=None) -> np.ndarray:
    """Element diameter: largest distance between two vertices."""
    coords = mesh.nodes if coords is None else coords
    V = coords[mesh.cells[:, : mesh.ref.n_vertices]]
    d = np.linalg.norm(V[:, :, None, :] - V[:, None, :, :], axis=-1)
    return d.reshape(len(V), -1).max(axis=1)


def min_jacobian(mesh: Mesh, coords=None) -> float:
    g = element_geometry(mesh, coords=coords, check=False)
    return float(g.detJ.min())


@dataclass
class FaceGeometry:
    nodes: np.ndarray    # (F, nfn) global node ids
    N: np.ndarray        # (nq, nfn)
    wds: np.ndarray      # (F, nq) weight * surface measure
    normal: np.ndarray   # (F, nq, nd) outward unit normal
    points: np.ndarray   # (F, nq, nd)


def face_geometry(mesh: Mesh, tag: str, coords=None, degree=None) -> FaceGeometry:
    """Quadrature data on the faces of boundary set ``tag``."""
    coords = mesh.nodes if coords is None else coords
    fref = ref_element(mesh.ref.face_kind)
    quad = quadrature_for(fref.kind, degree or max(2 * fref.order, 1))
    N, dN = fref.eval(quad.points)
    faces = mesh.boundary[tag]
    fn = mesh.face_nodes(tag)
    X = coords[fn]                                   # (F, nfn, nd)
    T = np.einsum("fai,qaj->fqij", X, dN)            # tangents (F, nq, nd, dim-1)
    if mesh.dim == 2:
        t = T[..., 0]
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    else:
        n = np.cross(T[..., 0], T[..., 1])
    ds = np.linalg.norm(n, axis=-1)
    n = n / ds[..., None]
    # orient outward with respect to the owning element's centroid
    cent = coords[mesh.cells[faces[:, 0]]].mean(axis=1)
    pts = np.einsum("qa,fai->fqi", N, X)
    sgn = np.sign(np.einsum("fqi,fqi->fq", n, pts - cent[:, None, :]))
    sgn[sgn == 0] = 1.0
    n = n * sgn[..., None]
    return FaceGeometry(fn, N, ds * quad.weights[None, :], n, pts)


def lumped_normals(mesh: Mesh, tag: str, coords=None):
    """Consistent nodal normals ``m_a^-1 * sum_f int_f N_a n ds`` on ``tag``.

    Returns ``(nodes, normals, weights)``; ``weights`` are ``int N_a ds``.
    Summed ``normals * weights`` equals the integral of ``n`` exactly.
    """
    fg = face_geometry(mesh, tag, coords)
    nodes = np.unique(fg.nodes)
    pos = np.searchsorted(nodes, fg.nodes)
    m = np.zeros(len(nodes))
    nm = np.zeros((len(nodes), mesh.dim))
    np.add.at(m, pos, np.einsum("qa,fq->fa", fg.N, fg.wds))
    np.add.at(nm, pos, np.einsum("qa,fq,fqi->fai", fg.N, fg.wds, fg.normal))
    return nodes, nm / m[:, None], m


# --------------------------------------------------------------------------
# point location
# --------------------------------------------------------------------------

def locate(mesh: Mesh, point, coords=None, tol=1e-10):
    """Find ``(element, xi)`` containing ``point``; raises DomainError if none."""
    coords = mesh.nodes if coords is None else coords
    point = np.asarray(point, dtype=float)
    X = coords[mesh.cells[:, : mesh.ref.n_vertices]]
    lo, hi = X.min(axis=1) - tol, X.max(axis=1) + tol
    cand = np.nonzero(np.all((point >= lo) & (point <= hi), axis=1))[0]
    for e in cand:
        xi = _inverse_map(mesh, coords, e, point)
        if xi is not None and mesh.ref.contains(xi, tol=1e-9):
            return int(e), xi
    raise DomainError(f"point {point.tolist()} is outside the mesh")


def _inverse_map(mesh, coords, e, point):
    X = coords[mesh.cells[e]]
    xi = mesh.ref.nodes.mean(axis=0)
    for _ in range(30):
        N, dN = mesh.ref.eval(xi)
        r = N[0] @ X - point
        Jg = X.T @ dN[0]
        try:
            step = np.linalg.solve(Jg, r)
        except np.linalg.LinAlgError:
            return None
        xi = xi - step
        if np.linalg.norm(step) < 1e-14:
            break
    return xi


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------

def write_mesh(mesh: Mesh, path) -> Path:
    path = Path(path)
    lines = [f"$nodes {mesh.dim} {mesh.n_nodes}"]
    lines += [" ".join(repr(float(c)) for c in row) for row in mesh.nodes]
    lines.append(f"$elements {mesh.kind} {mesh.n_cells}")
    lines += [" ".join(str(int(i)) for i in row) for row in mesh.cells]
    for tag, faces in mesh.boundary.items():
        lines.append(f"$boundary {tag} {len(faces)}")
        lines += [f"{int(e)} {int(f)}" for e, f in faces]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_mesh(path) -> Mesh:
    """Parse the block text format written by :func:`write_mesh`."""
    text = Path(path).read_text().split("\n")
    rows = [ln.split() for ln in text if ln.strip() and not ln.lstrip().startswith("#")]
    i = 0
    nodes = cells = kind = None
    boundary = {}
    seen_tags = set()
    while i < len(rows):
        head = rows[i]
        if head[0] == "$nodes":
            nd, n = int(head[1]), int(head[2])
            nodes = np.array([[float(v) for v in r] for r in rows[i + 1:i + 1 + n]]).reshape(n, nd)
            i += n + 1
        elif head[0] == "$elements":
            kind, m = head[1], int(head[2])
            cells = np.array([[int(v) for v in r] for r in rows[i + 1:i + 1 + m]], dtype=np.int64)
            i += m + 1
        elif head[0] == "$boundary":
            tag, f = head[1], int(head[2])
            if tag in seen_tags:
                raise MeshError(f"duplicate boundary tag {tag!r} in {path}")
            seen_tags.add(tag)
            boundary[tag] = np.array([[int(v) for v in r] for r in rows[i + 1:i + 1 + f]],
                                     dtype=np.int64).reshape(f, 2)
            i += f + 1
        else:
            raise MeshError(f"unexpected line {' '.join(head)!r} in {path}")
    if nodes is None or cells is None:
        raise MeshError(f"{path} lacks a $nodes or $elements block")
    return Mesh(nodes, cells, kind, boundary)

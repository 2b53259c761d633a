"""Structured mesh generators for the benchmark presets."""
from __future__ import annotations

from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .mesh import Mesh, exterior_faces, tag_boundary


def _compact(nodes, cells):
    used = np.unique(cells)
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return nodes[used], remap[cells]


def grid(xs: Sequence[float], ys: Sequence[float], kind: str = "tri3",
         mask: Optional[Callable] = None, diagonal: str = "right") -> Mesh:
    """Tensor-product grid on the given coordinate lines.

    ``mask(xc, yc)`` keeps a cell when true. Triangles split each cell along
    one diagonal: ``right`` (lower-left to upper-right) or ``alternate``.
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.c_[X.ravel(), Y.ravel()]
    nid = np.arange(len(nodes)).reshape(nx + 1, ny + 1)
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    keep = np.ones(len(i), dtype=bool)
    if mask is not None:
        xc = 0.5 * (xs[i] + xs[i + 1])
        yc = 0.5 * (ys[j] + ys[j + 1])
        keep = np.array([bool(mask(a, b)) for a, b in zip(xc, yc)])
    i, j = i[keep], j[keep]
    n00, n10, n11, n01 = nid[i, j], nid[i + 1, j], nid[i + 1, j + 1], nid[i, j + 1]
    if kind == "quad4":
        cells = np.c_[n00, n10, n11, n01]
    elif kind in ("tri3", "tri6"):
        if diagonal == "right":
            flip = np.zeros(len(i), dtype=bool)
        elif diagonal == "alternate":
            flip = (i + j) % 2 == 1
        else:
            raise ValueError(f"unknown diagonal pattern {diagonal!r}")
        a = np.where(flip, np.c_[n00, n10, n01].T, np.c_[n00, n10, n11].T).T
        b = np.where(flip, np.c_[n10, n11, n01].T, np.c_[n00, n11, n01].T).T
        cells = np.empty((2 * len(i), 3), dtype=np.int64)
        cells[0::2], cells[1::2] = a, b
    else:
        raise ValueError(f"grid does not support {kind!r}")
    nodes, cells = _compact(nodes, cells)
    mesh = Mesh(nodes, cells, "quad4" if kind == "quad4" else "tri3")
    return to_p2(mesh) if kind == "tri6" else mesh


def to_p2(mesh: Mesh) -> Mesh:
    """Promote a ``tri3`` mesh to ``tri6`` with straight-edge midside nodes."""
    if mesh.kind != "tri3":
        raise ValueError("to_p2 expects a tri3 mesh")
    edges = np.sort(mesh.cells[:, [[0, 1], [1, 2], [2, 0]]], axis=2).reshape(-1, 2)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])
    cells = np.c_[mesh.cells, mesh.n_nodes + inv.ravel().reshape(-1, 3)]
    return Mesh(nodes, cells, "tri6", {k: v.copy() for k, v in mesh.boundary.items()})


def map_bilinear(mesh: Mesh, corners) -> Mesh:
    """Map a mesh of the unit square onto the quadrilateral ``corners``."""
    c = np.asarray(corners, float)
    s, t = mesh.nodes[:, 0], mesh.nodes[:, 1]
    mesh.nodes = ((1 - s) * (1 - t))[:, None] * c[0] + (s * (1 - t))[:, None] * c[1] \
        + (s * t)[:, None] * c[2] + ((1 - s) * t)[:, None] * c[3]
    return mesh


def cook_membrane(n: int, kind: str = "tri3") -> Mesh:
    """Tapered Cook panel with corners (0,0), (48,44), (48,60), (0,44).

    Tags: ``clamp`` (x=0), ``load`` (x=48), ``free`` (top and bottom).
    """
    u = np.linspace(0.0, 1.0, n + 1)
    mesh = map_bilinear(grid(u, u, "quad4" if kind == "quad4" else "tri3"),
                        [(0, 0), (48, 44), (48, 60), (0, 44)])
    tag_boundary(mesh, {"clamp": lambda c: c[0] < 1e-9, "load": lambda c: c[0] > 48 - 1e-9}, default="free")
    return to_p2(mesh) if kind == "tri6" else mesh


def cantilever(nx: int, ny: int, kind: str = "quad4", length: float = 10.0, height: float = 1.0) -> Mesh:
    """Beam ``[0, length] x [0, height]`` clamped at x=0 (tag ``clamp``)."""
    mesh = grid(np.linspace(0, length, nx + 1), np.linspace(0, height, ny + 1),
                "quad4" if kind == "quad4" else "tri3")
    tag_boundary(mesh, {"clamp": lambda c: c[0] < 1e-9}, default="free")
    return to_p2(mesh) if kind == "tri6" else mesh


def graded_lines(a: float, b: float, h0: float, ratio: float, hmax: Optional[float] = None) -> np.ndarray:
    """Coordinates from ``a`` to ``b`` whose spacing starts at ``h0`` next to
    ``a`` and grows geometrically; the last interval is stretched to fit."""
    sign = 1.0 if b > a else -1.0
    L = abs(b - a)
    pts, h, x = [0.0], h0, 0.0
    while x + h < L - 1e-12:
        x += h
        pts.append(x)
        h = min(h * ratio, hmax) if hmax else h * ratio
    if len(pts) > 1 and L - pts[-1] < 0.5 * h / ratio:
        pts.pop()
    pts.append(L)
    return a + sign * np.array(pts)


def fsi_beam_meshes(H=20.0, L=80.0, h=1.0, l=10.0, x_beam=20.0, ny_beam=16, nx_beam=2,
                    ratio_up=1.3, ratio_down=1.25, hmax=6.0, ratio_y=1.3):
    """Fluid channel with an embedded vertical flexible beam and the matching
    solid mesh.

    The beam occupies ``[x_beam - h/2, x_beam + h/2] x [0, l]``. Fluid tags:
    ``inlet``, ``outlet``, ``bottom``, ``top``, ``interface``; solid tags:
    ``base``, ``interface``.
    """
    x0, x1 = x_beam - 0.5 * h, x_beam + 0.5 * h
    hb = h / nx_beam
    up = graded_lines(x0, 0.0, hb, ratio_up, hmax)[::-1]
    down = graded_lines(x1, L, hb, ratio_down, hmax)
    beam_x = np.linspace(x0, x1, nx_beam + 1)
    xs = np.unique(np.r_[up, beam_x, down])
    yb = np.linspace(0.0, l, ny_beam + 1)
    ys = np.unique(np.r_[yb, graded_lines(l, H, l / ny_beam, ratio_y, hmax)])

    def in_beam(xc, yc):
        return x0 < xc < x1 and yc < l

    fluid = grid(xs, ys, "tri3", mask=lambda a, b: not in_beam(a, b), diagonal="alternate")
    eps = 1e-9
    tag_boundary(fluid, {
        "inlet": lambda c: c[0] < eps,
        "outlet": lambda c: c[0] > L - eps,
        "bottom": lambda c: c[1] < eps,
        "top": lambda c: c[1] > H - eps,
    }, default="interface")
    solid = grid(beam_x, yb, "tri3", diagonal="alternate")
    tag_boundary(solid, {"base": lambda c: c[1] < eps}, default="interface")
    return fluid, solid


def box_tets(xs, ys, zs, mask: Optional[Callable] = None) -> Mesh:
    """Tetrahedral mesh of a hexahedral grid, six tets per hex (Kuhn split)."""
    xs, ys, zs = (np.asarray(v, float) for v in (xs, ys, zs))
    nx, ny, nz = len(xs) - 1, len(ys) - 1, len(zs) - 1
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.c_[X.ravel(), Y.ravel(), Z.ravel()]
    nid = np.arange(len(nodes)).reshape(nx + 1, ny + 1, nz + 1)
    kuhn = [(0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7), (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7)]
    cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if mask is not None and not mask(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]),
                                                 0.5 * (zs[k] + zs[k + 1])):
                    continue
                v = [nid[i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)] for b in range(8)]
                for t in kuhn:
                    cells.append([v[q] for q in t])
    cells = np.array(cells, dtype=np.int64)
    # orient positively
    P = nodes[cells]
    vol = np.einsum("ei,ei->e", np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]), P[:, 3] - P[:, 0])
    cells[vol < 0] = cells[vol < 0][:, [0, 2, 1, 3]]
    nodes, cells = _compact(nodes, cells)
    return Mesh(nodes, cells, "tet4")


def plate3d_meshes(H=0.5, W=1.0, L=3.0, x_plate=0.5, t=0.05, h_plate=0.3, nx=30, ny=10, nz=10):
    """Channel ``[0,L] x [0,H] x [0,W]`` with a thin vertical plate across the
    full width, clamped on the floor. Returns ``(fluid, solid)``."""
    x0, x1 = x_plate - 0.5 * t, x_plate + 0.5 * t
    xs = np.unique(np.r_[np.linspace(0, x0, max(2, int(nx * x0 / L)) + 1), x1,
                         np.linspace(x1, L, max(2, int(nx * (L - x1) / L)) + 1)])
    ys = np.unique(np.r_[np.linspace(0, h_plate, max(2, int(ny * h_plate / H)) + 1),
                         np.linspace(h_plate, H, max(2, ny - int(ny * h_plate / H)) + 1)])
    zs = np.linspace(0, W, nz + 1)

    def in_plate(xc, yc, zc):
        return x0 < xc < x1 and yc < h_plate

    fluid = box_tets(xs, ys, zs, mask=lambda a, b, c: not in_plate(a, b, c))
    eps = 1e-9
    tag_boundary(fluid, {
        "inlet": lambda c: c[0] < eps,
        "outlet": lambda c: c[0] > L - eps,
        "walls": lambda c: c[1] < eps or c[1] > H - eps or c[2] < eps or c[2] > W - eps,
    }, default="interface")
    solid = box_tets(xs[(xs >= x0 - eps) & (xs <= x1 + eps)], ys[ys <= h_plate + eps], zs)
    tag_boundary(solid, {"base": lambda c: c[1] < eps,
                         "sides": lambda c: c[2] < eps or c[2] > W - eps}, default="interface")
    return fluid, solid


def unit_square(n: int, kind: str = "tri3", diagonal: str = "right") -> Mesh:
    u = np.linspace(0.0, 1.0, n + 1)
    mesh = grid(u, u, kind, diagonal=diagonal)
    tag_boundary(mesh, {}, default="boundary")
    return mesh


__all__ = ["grid", "to_p2", "map_bilinear", "cook_membrane", "cantilever", "graded_lines",
           "fsi_beam_meshes", "box_tets", "plate3d_meshes", "unit_square", "exterior_faces"]

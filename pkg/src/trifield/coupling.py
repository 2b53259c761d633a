"""Partitioned Dirichlet-Neumann fluid-structure coupling with Aitken
relaxation of the interface displacement."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from .ale import MeshMotion
from .errors import InterfaceError, StepFailure
from .fluid import FluidSolver
from .mesh import Mesh, lumped_normals
from .solid import SolidSolver

log = logging.getLogger(__name__)


class InterfaceMap:
    """Pairing of coincident solid and fluid nodes on the common boundary.

    ``solid_nodes[i]`` and ``fluid_nodes[i]`` share a position;
    ``solid_normals`` are the consistent nodal normals of the solid side and
    ``solid_weights`` the nodal boundary measures ``int N_a ds``.
    """

    def __init__(self, solid_mesh: Mesh, fluid_mesh: Mesh, solid_tag="interface", fluid_tag="interface",
                 tol=1e-10):
        sn, nsl, wsl = lumped_normals(solid_mesh, solid_tag)
        fn, nfl, _ = lumped_normals(fluid_mesh, fluid_tag)
        if len(sn) != len(fn):
            raise InterfaceError(f"interface node counts differ: solid {len(sn)}, fluid {len(fn)}")
        scale = max(1.0, float(np.ptp(solid_mesh.nodes, axis=0).max()))
        dist, idx = cKDTree(fluid_mesh.nodes[fn]).query(solid_mesh.nodes[sn])
        if np.any(dist > tol * scale):
            k = int(np.argmax(dist))
            raise InterfaceError(f"solid interface node {sn[k]} has no fluid partner (distance {dist[k]:.3e})")
        if len(np.unique(idx)) != len(idx):
            raise InterfaceError("interface pairing is not one-to-one")
        self.solid_nodes = sn
        self.fluid_nodes = fn[idx]
        self.solid_normals = nsl
        self.fluid_normals = nfl[idx]
        self.solid_weights = wsl

    def __len__(self):
        return len(self.solid_nodes)


@dataclass
class AitkenState:
    omega: float = 0.5
    omega_init: float = 0.5
    omega_min: float = 0.05
    omega_max: float = 1.0
    r_prev: Optional[np.ndarray] = None
    fixed: bool = False

    def reset(self):
        self.omega = self.omega_init
        self.r_prev = None

    def clamp(self, w):
        return float(min(max(w, self.omega_min), self.omega_max))


def aitken_update(omega_k, r_k, r_k1, omega_min=-np.inf, omega_max=np.inf):
    """``-omega_k <r_k, r_k1 - r_k> / |r_k1 - r_k|^2``, clamped; a zero
    denominator leaves ``omega_k`` unchanged."""
    r_k = np.ravel(np.asarray(r_k, dtype=float))
    dr = np.ravel(np.asarray(r_k1, dtype=float)) - r_k
    den = float(dr @ dr)
    if den == 0.0:
        return omega_k
    w = -omega_k * float(r_k @ dr) / den
    return float(min(max(w, omega_min), omega_max))


def transfer_traction(fluid: FluidSolver, imap: InterfaceMap, n_solid_nodes: int) -> np.ndarray:
    """Nodal traction on the solid, ``n_sl . (-p_fl I + s_fl)``.

    Returned as an ``(n_solid_nodes, nd)`` array that is zero away from the
    interface, ready for :meth:`SolidSolver.set_traction`.
    """
    sig = fluid.nodal_stress()[imap.fluid_nodes]
    t = np.zeros((n_solid_nodes, fluid.nd))
    t[imap.solid_nodes] = np.einsum("nij,nj->ni", sig, imap.solid_normals)
    return t


def relax(d_gamma, d_solid, omega):
    """Relaxed interface displacement ``d + omega (d_solid - d)``."""
    return np.asarray(d_gamma) + omega * (np.asarray(d_solid) - np.asarray(d_gamma))


def interface_velocity(d_gamma, hist, dt, first_step):
    """Velocity of the interface from its displacement history with the
    fluid's time stencil (BDF2, BDF1 on the first step)."""
    if first_step:
        return (d_gamma - hist[0]) / dt
    return (3.0 * d_gamma - 4.0 * hist[0] + hist[1]) / (2.0 * dt)


def transfer_velocity(d_gamma, d_solid, hist, dt, aitken: AitkenState, first_step=False):
    """Relax the interface displacement and return ``(d_new, velocity)``."""
    d_new = relax(d_gamma, d_solid, aitken.omega)
    return d_new, interface_velocity(d_new, hist, dt, first_step)


@dataclass
class CouplingConfig:
    tol: float = 1e-6
    max_iters: int = 50
    floor: float = 1e-6
    fluid_tol: float = 1e-5
    relaxation: str = "aitken"
    omega_init: float = 0.5
    omega_min: float = 0.05
    omega_max: float = 1.0
    fluid_passes: int = 1
    warm_start: bool = False
    predictor_order: int = 3


@dataclass
class CouplingReport:
    converged: bool
    iterations: int
    omegas: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    fluid_changes: List[float] = field(default_factory=list)
    solid_iterations: List[int] = field(default_factory=list)
    seconds: float = 0.0
    message: str = ""

    def log_line(self, step, t):
        om = ",".join(f"{w:.4g}" for w in self.omegas)
        res = self.residuals[-1] if self.residuals else 0.0
        return f"step={step} time={t:.6g} iters={self.iterations} omega=[{om}] residual={res:.3e}"


def _rms(a):
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(np.mean(a ** 2))) if a.size else 0.0


class CoupledProblem:
    """Solid and fluid solvers tied on a matching interface.

    The fluid mesh must carry the interface tag; ``motion`` moves it. The
    caller configures the boundary conditions of each sub-solver except those
    on the interface.
    """

    def __init__(self, solid: SolidSolver, fluid: FluidSolver, motion: MeshMotion, imap: InterfaceMap,
                 cfg: Optional[CouplingConfig] = None, interface_tag="interface"):
        self.solid = solid
        self.fluid = fluid
        self.motion = motion
        self.imap = imap
        self.cfg = cfg or CouplingConfig()
        self.tag = interface_tag
        if not np.array_equal(np.sort(motion.moving), np.sort(imap.fluid_nodes)):
            raise InterfaceError("mesh motion must be driven by the interface nodes")
        # motion.moving order -> interface order
        pos = {n: i for i, n in enumerate(imap.fluid_nodes)}
        self._mv = np.array([pos[n] for n in motion.moving])
        nd = solid.nd
        self.gamma_hist = np.zeros((4, len(imap), nd))
        self.predictor_order = self.cfg.predictor_order
        self._bc = fluid.fix(imap.fluid_nodes, tuple(range(nd)), np.zeros((len(imap), nd)))
        # coupling iterations of one step change the fluid matrix only slightly
        fluid.reuse_factorization = True
        self.aitken = AitkenState(self.cfg.omega_init, self.cfg.omega_init, self.cfg.omega_min,
                                  self.cfg.omega_max, fixed=self.cfg.relaxation == "fixed")
        self.reports: List[CouplingReport] = []
        self.step_index = 0
        self.time = 0.0

    def _solid_interface(self):
        return self.solid.state.d[self.imap.solid_nodes]

    def predictor(self):
        """Extrapolated interface displacement: constant on the first step,
        then extrapolation of increasing order up to ``predictor_order``."""
        h = self.gamma_hist
        k = min(self.step_index, self.predictor_order)
        if k == 0:
            return h[0]
        if k == 1:
            return 2.0 * h[0] - h[1]
        if k == 2:
            return 3.0 * h[0] - 3.0 * h[1] + h[2]
        return 4.0 * h[0] - 6.0 * h[1] + 4.0 * h[2] - h[3]

    def step(self, dt: float) -> CouplingReport:
        """One coupled time step; raises :class:`StepFailure` when the
        coupling or a sub-solver fails."""
        t0 = time.perf_counter()
        cfg = self.cfg
        first = self.step_index == 0
        rep = CouplingReport(False, 0)
        ait = self.aitken
        w_last = ait.omega
        ait.reset()
        if cfg.warm_start and self.step_index > 0:
            ait.omega = ait.clamp(w_last)
        d_g = self.predictor().copy()
        x_solid = self.solid.predictor()
        self.solid._begin_step(dt)
        nd = self.solid.nd
        for k in range(cfg.max_iters):
            vel = interface_velocity(d_g, self.gamma_hist, dt, first)
            self.motion.move(d_g[self._mv], dt, vel[self._mv])
            self.fluid.state.u_dom = self.motion.velocity
            self.fluid.update_bc(self._bc, vel)
            for _ in range(max(1, cfg.fluid_passes)):
                ch = self.fluid.picard_pass(dt)
                if ch < cfg.fluid_tol:
                    break
            self.solid.set_traction(self.tag, transfer_traction(self.fluid, self.imap, self.solid.mesh.n_nodes))
            srep = self.solid.solve(dt, x_solid)
            rep.solid_iterations.append(srep.iterations)
            if not srep.converged:
                rep.message = f"solid solve failed in coupling iteration {k + 1}: {srep.message}"
                break
            x_solid = self.solid.state.x
            r = self._solid_interface() - d_g
            rel = _rms(r) / max(_rms(d_g), cfg.floor)
            rep.iterations = k + 1
            rep.residuals.append(rel)
            rep.fluid_changes.append(ch)
            if rel < cfg.tol and ch < cfg.fluid_tol:
                rep.converged = True
                break
            if not ait.fixed and ait.r_prev is not None:
                ait.omega = aitken_update(ait.omega, ait.r_prev, r, ait.omega_min, ait.omega_max)
            ait.r_prev = r.copy()
            rep.omegas.append(ait.omega)
            d_g = d_g + ait.omega * r
        else:
            rep.message = f"coupling did not converge in {cfg.max_iters} iterations"
        rep.seconds = time.perf_counter() - t0
        if not rep.converged:
            self.solid._step_cache = None
            raise StepFailure(f"coupled step {self.step_index + 1} failed: {rep.message}", rep)
        self.solid.commit(dt)
        self.fluid.commit(dt)
        self.motion.commit()
        self.gamma_hist = np.concatenate([d_g[None], self.gamma_hist[:-1]])
        self.step_index += 1
        self.time += dt
        self.reports.append(rep)
        log.info(rep.log_line(self.step_index, self.time))
        return rep


def coupled_time_step(problem: CoupledProblem, dt: float):
    rep = problem.step(dt)
    return problem, rep

"""Build and run a simulation from a :class:`RunConfig`."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import presets
from .ale import MeshMotion
from .config import RunConfig
from .coupling import CoupledProblem, CouplingConfig, InterfaceMap
from .errors import MeshError, SolverError, StepFailure, TrifieldError
from .fem import LinearSolverConfig
from .fluid import FluidMaterial, FluidSolver, PicardConfig
from .mesh import Mesh
from .probes import PointProbe, ProbeSeries, component_names
from .solid import NewtonConfig, SolidMaterial, SolidSolver
from .vtk import step_filename, write_vtk

log = logging.getLogger(__name__)


def solid_material(cfg: RunConfig, nd: int) -> SolidMaterial:
    s = cfg.solid
    g = tuple(s.get("gravity", (0.0,) * nd))
    if "mu" in s:
        return SolidMaterial(s["rho"], s["mu"], s.get("inv_lambda", 0.0), g)
    return SolidMaterial.from_young(s["young"], s["poisson"], s["rho"], g)


def fluid_material(cfg: RunConfig, nd: int) -> FluidMaterial:
    f = cfg.fluid
    mu = f["mu"] if "mu" in f else f["rho"] * f["nu"]
    return FluidMaterial(f["rho"], mu, (0.0,) * nd)


# --------------------------------------------------------------------------
# simulations
# --------------------------------------------------------------------------

class Simulation:
    """Common driver interface: ``step(dt)``, nodal output fields per domain
    and the meshes those fields live on."""

    kind = ""

    def __init__(self, cfg: RunConfig, workers: int = 1):
        self.cfg = cfg
        self.workers = workers
        self.time = 0.0
        self.steps = 0
        self.iteration_log: List[int] = []

    def step(self, dt: float):
        raise NotImplementedError

    def domains(self) -> Dict[str, Mesh]:
        raise NotImplementedError

    def fields(self, domain: str) -> Dict[str, Tuple[str, np.ndarray]]:
        """``name -> (kind, nodal array)`` with kind vector, sym or scalar."""
        raise NotImplementedError

    def newton(self):
        sv = self.cfg.solver
        return NewtonConfig(tol=sv["newton_tol"], max_iters=sv["newton_max_iters"])

    def linear(self):
        return LinearSolverConfig(tol=self.cfg.solver["linear_tol"])

    def _solid_fields(self, solver: SolidSolver):
        st = solver.state
        return {"d": ("vector", st.d), "s": ("sym", st.s), "p": ("scalar", st.p), "a": ("vector", st.a)}

    def _fluid_fields(self, solver: FluidSolver):
        st = solver.state
        return {"u": ("vector", st.u), "s": ("sym", st.s), "p": ("scalar", st.p)}


class SolidSimulation(Simulation):
    kind = "solid"

    def __init__(self, cfg: RunConfig, workers: int = 1):
        super().__init__(cfg, workers)
        mesh = cfg.meshes().solid
        s = cfg.solid
        self.solver = SolidSolver(mesh, solid_material(cfg, mesh.dim), mode=s["mode"], subscales=s["subscales"],
                                  newton=self.newton(), linear=self.linear(), assembly_workers=workers)
        if cfg.preset == "cook":
            self.solver.fix("clamp")
            self.solver.set_traction("load", (0.0, s["load"] / presets.COOK_LOAD_EDGE))
            self.solver.load_factor = presets.linear_ramp(cfg.t_end)
        elif cfg.preset == "cantilever":
            self.solver.fix("clamp")
        else:
            raise KeyError(cfg.preset)

    def step(self, dt):
        rep = self.solver.step(dt)
        self.time = self.solver.state.time
        self.steps += 1
        self.iteration_log.append(rep.iterations)
        log.info("step=%d time=%.6g newton=%d residual=%.3e", self.steps, self.time, rep.iterations,
                 rep.residuals[-1] if rep.residuals else 0.0)
        return rep

    def domains(self):
        return {"solid": self.solver.mesh}

    def fields(self, domain):
        return self._solid_fields(self.solver)


class FluidSimulation(Simulation):
    kind = "fluid"

    def __init__(self, cfg: RunConfig, workers: int = 1):
        super().__init__(cfg, workers)
        mesh = cfg.meshes().fluid
        sv = cfg.solver
        self.solver = FluidSolver(mesh, fluid_material(cfg, mesh.dim),
                                  PicardConfig(sv["picard_tol"], sv["picard_max_iters"]), self.linear(),
                                  assembly_workers=workers)
        self.solver.reuse_factorization = True
        _fluid_channel_bcs(cfg, self.solver)
        self.solver.fix("interface")

    def step(self, dt):
        rep = self.solver.step(dt)
        self.time = self.solver.state.time
        self.steps += 1
        self.iteration_log.append(rep.iterations)
        log.info("step=%d time=%.6g picard=%d change=%.3e", self.steps, self.time, rep.iterations,
                 rep.changes[-1] if rep.changes else 0.0)
        return rep

    def domains(self):
        return {"fluid": self.solver.mesh}

    def fields(self, domain):
        return self._fluid_fields(self.solver)


def _fluid_channel_bcs(cfg: RunConfig, fluid: FluidSolver):
    """Inflow, walls and outlet of the channel presets."""
    f = cfg.fluid
    ramp = presets.smooth_ramp(f.get("ramp_time", 0.0))
    U = f.get("inlet_velocity", 1.0)
    nd = fluid.nd
    if cfg.preset in ("fsi_beam2d", "beam_channel2d"):
        fluid.fix("inlet", value=lambda t, x: np.c_[np.full(len(x), U * ramp(t)), np.zeros(len(x))])
        fluid.fix("bottom", (1,))
        fluid.fix("top", (1,))
    elif cfg.preset == "plate3d":
        prof = presets.plate_inlet_profile(U)
        fluid.fix("walls")
        fluid.fix("inlet", value=lambda t, x: np.c_[ramp(t) * prof(x), np.zeros((len(x), nd - 1))])
    else:
        raise KeyError(cfg.preset)


def _motion_fixed(cfg: RunConfig, fluid_mesh: Mesh) -> Dict[int, np.ndarray]:
    bn = fluid_mesh.boundary_nodes
    if cfg.preset == "fsi_beam2d":
        ends = np.r_[bn("inlet"), bn("outlet")]
        return {0: ends, 1: np.r_[ends, bn("bottom"), bn("top")]}
    if cfg.preset == "plate3d":
        fixed = np.r_[bn("inlet"), bn("outlet"), bn("walls")]
        return {c: fixed for c in range(fluid_mesh.dim)}
    raise KeyError(cfg.preset)


class FSISimulation(Simulation):
    kind = "fsi"

    def __init__(self, cfg: RunConfig, workers: int = 1):
        super().__init__(cfg, workers)
        meshes = cfg.meshes()
        sm, fm = meshes.solid, meshes.fluid
        s, sv = cfg.solid, cfg.solver
        self.solid = SolidSolver(sm, solid_material(cfg, sm.dim), mode=s["mode"], subscales=s["subscales"],
                                 newton=self.newton(), linear=self.linear(), assembly_workers=workers)
        self.solid.fix("base")
        if cfg.preset == "plate3d":
            # the plate's side faces slide along the channel walls
            self.solid.fix("sides", (2,))
        self.fluid = FluidSolver(fm, fluid_material(cfg, fm.dim),
                                 PicardConfig(sv["picard_tol"], sv["picard_max_iters"]), self.linear(),
                                 assembly_workers=workers)
        _fluid_channel_bcs(cfg, self.fluid)
        imap = InterfaceMap(sm, fm)
        motion = MeshMotion(fm, imap.fluid_nodes, _motion_fixed(cfg, fm))
        ccfg = CouplingConfig(tol=sv["coupling_tol"], max_iters=sv["coupling_max_iters"],
                              floor=sv["coupling_floor"], relaxation=sv["relaxation"], omega_init=sv["omega_init"],
                              omega_min=sv["omega_min"], omega_max=sv["omega_max"])
        self.problem = CoupledProblem(self.solid, self.fluid, motion, imap, ccfg)

    def step(self, dt):
        rep = self.problem.step(dt)
        self.time = self.problem.time
        self.steps += 1
        self.iteration_log.append(rep.iterations)
        return rep

    def domains(self):
        return {"solid": self.solid.mesh, "fluid": self.fluid.mesh}

    def fields(self, domain):
        return self._solid_fields(self.solid) if domain == "solid" else self._fluid_fields(self.fluid)


SIMULATIONS = {"solid": SolidSimulation, "fluid": FluidSimulation, "fsi": FSISimulation}


def build_simulation(cfg: RunConfig, workers: int = 1) -> Simulation:
    return SIMULATIONS[cfg.kind](cfg, workers)


# --------------------------------------------------------------------------
# run loop
# --------------------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    steps: int
    time: float
    message: str = ""
    probe_files: Dict[str, str] = field(default_factory=dict)
    vtk_files: List[str] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    seconds: float = 0.0


class _ProbeWriter:
    def __init__(self, sim: Simulation, out_dir: str):
        self.items = []
        doms = sim.domains()
        for p in sim.cfg.probes:
            mesh = doms[p.domain]
            pp = PointProbe(mesh, p.point)
            flds = sim.fields(p.domain)
            cols = [c for name, (k, _) in flds.items() for c in component_names(name, mesh.dim, k)]
            path = os.path.join(out_dir, f"probe_{p.name}.csv")
            self.items.append((p, pp, ProbeSeries(path, cols)))

    def write(self, sim: Simulation):
        for p, pp, series in self.items:
            vals = [np.ravel(pp.sample(a)) for _, (_, a) in sim.fields(p.domain).items()]
            series.append(sim.time, np.concatenate(vals))

    @property
    def files(self):
        return {p.name: s.path for p, _, s in self.items}


def write_fields(sim: Simulation, out_dir: str, step: int) -> List[str]:
    out = []
    for dom, mesh in sim.domains().items():
        data = {}
        for name, (k, a) in sim.fields(dom).items():
            if k == "sym":
                for j, c in enumerate(component_names(name, mesh.dim, k)):
                    data[c] = a[:, j]
            else:
                data[name] = a
        prefix = os.path.join(out_dir, dom if len(sim.domains()) > 1 else sim.cfg.preset)
        out.append(write_vtk(step_filename(prefix, step), mesh, data, f"{sim.cfg.preset} {dom} t={sim.time:.17g}"))
    return out


def run(cfg: RunConfig, out_dir: Optional[str] = None, vtk_every: Optional[int] = None,
        max_steps: Optional[int] = None, deterministic: Optional[bool] = None,
        on_step: Optional[Callable[[Simulation], None]] = None) -> RunResult:
    """Execute ``cfg`` to ``t_end`` (or ``max_steps``), writing one probe row
    per accepted step and field files every ``vtk_every`` steps (0: none)."""
    t0 = time.perf_counter()
    out_dir = out_dir or cfg.output["dir"]
    vtk_every = cfg.output["vtk_every"] if vtk_every is None else vtk_every
    deterministic = cfg.output["deterministic"] if deterministic is None else deterministic
    workers = 1 if deterministic else max(1, min(4, os.cpu_count() or 1))
    n_steps = cfg.n_steps if max_steps is None else min(cfg.n_steps, max_steps)
    try:
        sim = build_simulation(cfg, workers)
    except (TrifieldError, ValueError) as exc:
        return RunResult(2, 0, 0.0, f"setup failed: {exc}")
    os.makedirs(out_dir, exist_ok=True)
    probes = _ProbeWriter(sim, out_dir)
    res = RunResult(0, 0, 0.0, probe_files=probes.files)
    if vtk_every:
        res.vtk_files += write_fields(sim, out_dir, 0)
    for k in range(n_steps):
        # constant steps keep the BDF2 stencils valid; t_end is rounded up
        dt = cfg.dt
        try:
            sim.step(dt)
        except (StepFailure, SolverError, MeshError) as exc:
            res.exit_code = 3
            res.message = f"step {k + 1} (t={sim.time + dt:.6g}) failed: {exc}"
            log.error(res.message)
            break
        probes.write(sim)
        if vtk_every and (sim.steps % vtk_every == 0 or k == n_steps - 1):
            res.vtk_files += write_fields(sim, out_dir, sim.steps)
        if on_step is not None:
            on_step(sim)
    res.steps, res.time = sim.steps, sim.time
    res.iterations = list(sim.iteration_log)
    res.seconds = time.perf_counter() - t0
    if res.exit_code == 0:
        res.message = f"completed {res.steps} steps to t={res.time:.6g} in {res.seconds:.1f} s"
    return res


__all__ = ["build_simulation", "run", "RunResult", "Simulation", "SolidSimulation", "FluidSimulation",
           "FSISimulation", "write_fields", "solid_material", "fluid_material"]

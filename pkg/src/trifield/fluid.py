"""Three-field (velocity, deviatoric stress, pressure) incompressible
Navier-Stokes on a possibly moving mesh, stabilized with a dynamic velocity
sub-scale and quasi-static stress and pressure sub-scales.

The convective velocity ``c = u - u_dom`` is frozen during one fixed-point
pass, so each pass is a linear solve. Pressure is positive in compression
and the Cauchy stress is ``-p I + s``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, List, Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np

from . import sgs
from .errors import ConfigError, SolverError, StepFailure
from .fem import (Assembler, DirichletMasker, DofMap, LinearSolverConfig, ReusableFactorization, SparseSystem,
                  solve_linear, three_field_layout)
from .mesh import Mesh, default_degree, element_diameters, element_geometry, quadrature_for
from .tensors import sym, sym_from_voigt, voigt_from_sym, voigt_row


@dataclass
class FluidMaterial:
    rho: float
    mu: float
    body_force: Tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        bad = []
        if not self.rho > 0:
            bad.append(f"fluid density must be positive, got {self.rho}")
        if not self.mu > 0:
            bad.append(f"fluid viscosity must be positive, got {self.mu}")
        if bad:
            raise ConfigError("; ".join(bad), bad)
        self.body_force = tuple(float(v) for v in self.body_force)


def tau_fluid(h, mat: FluidMaterial, u_norm, order: int = 1, c1=4.0, c2=1.0, c3=0.1, c4=0.1):
    """Stabilization parameters; ``u_norm`` is the largest velocity norm
    over the element and ``h`` its diameter (divided by ``order``)."""
    h = np.asarray(h, dtype=float) / order
    tau1 = 1.0 / (c1 * mat.mu / h ** 2 + c2 * mat.rho * np.asarray(u_norm, float) / h)
    return tau1, c3 * 2.0 * mat.mu, c4 * 2.0 * mat.mu


def bdf2_rate(u_new, u_n, u_nm1, dt):
    return (3.0 * np.asarray(u_new) - 4.0 * np.asarray(u_n) + np.asarray(u_nm1)) / (2.0 * dt)


# --------------------------------------------------------------------------
# element kernel
# --------------------------------------------------------------------------

_P_RHO, _P_MU, _P_T2, _P_T3, _P_DT, _P_A0 = range(6)


def _fluid_element(ue, c, uh, usub_n, fq, dNdx, wdet, tau1, N, prm, nd, transient):
    ns = nd * (nd + 1) // 2
    nloc = N.shape[1]
    nc = nd + ns + 1
    U = ue.reshape(nloc, nc)
    u, sv, pv = U[:, :nd], U[:, nd:nd + ns], U[:, nd + ns]
    rho, mu, tau2, tau3, dt, a0 = (prm[k] for k in range(6))

    Sn = sym_from_voigt(sv, nd)
    S = jnp.einsum("qa,aij->qij", N, Sn)
    P = N @ pv
    uq = N @ u
    cq = N @ c
    gradu = jnp.einsum("ai,qaj->qij", u, dNdx)
    epsu = sym(gradu)
    divu = jnp.trace(gradu, axis1=-2, axis2=-1)
    divS = jnp.einsum("aij,qaj->qi", Sn, dNdx)
    gradP = jnp.einsum("a,qai->qi", pv, dNdx)
    conv = jnp.einsum("qij,qj->qi", gradu, cq)
    if transient:
        dtu = (a0 * uq - N @ uh) / dt
    else:
        dtu = jnp.zeros_like(uq)

    r1 = rho * fq - rho * dtu - rho * conv + divS - gradP
    if transient:
        usub, rdt_usub = sgs.fluid_velocity_subscale(r1, tau1, rho, dt, usub_n)
    else:
        usub, rdt_usub = tau1 * r1, jnp.zeros_like(r1)
    ssub = -tau2 * (S / (2.0 * mu) - epsu)
    psub = -tau3 * divu

    cg = jnp.einsum("qi,qai->qa", cq, dNdx)
    Rv = jnp.einsum("qa,qi->qai", N, rho * dtu + rho * conv - rho * fq + rdt_usub) \
        + jnp.einsum("qij,qaj->qai", S + ssub, dNdx) \
        - (P + psub)[:, None, None] * dNdx \
        - rho * cg[..., None] * usub[:, None, :]
    M = N[..., None, None] * ((S + ssub) / (2.0 * mu) - epsu)[:, None] \
        + sym(jnp.einsum("qi,qaj->qaij", usub, dNdx))
    Rs = 2.0 * mu * voigt_row(M, nd)
    Rp = N * divu[:, None] - jnp.einsum("qi,qai->qa", usub, dNdx)

    Rq = jnp.concatenate([Rv, Rs, Rp[..., None]], axis=-1)
    Re = jnp.einsum("q,qac->ac", wdet, Rq).reshape(-1)
    return Re, (Re, (usub, ssub, psub, divu))


@lru_cache(maxsize=None)
def _fluid_kernel(nd, transient, tangent=True):
    fn = partial(_fluid_element, nd=nd, transient=transient)
    if tangent:
        fn = jax.jacfwd(fn, has_aux=True)
    return jax.jit(jax.vmap(fn, in_axes=(0, 0, 0, 0, 0, 0, 0, 0, None, None)))


def _voigt_basis(nd):
    """``E[i, j, k]``: tensor component ``(i, j)`` of the k-th Voigt basis
    tensor, with ones on both off-diagonal entries."""
    ns = nd * (nd + 1) // 2
    return np.stack([sym_from_voigt(np.eye(ns)[k], nd, np) for k in range(ns)], axis=-1)


class _Selectors:
    """Constant parts of the discrete operators of one pass.

    Every operator evaluated at a quadrature point has the form
    ``sum_s phi_s(a) C[s, m, c]`` where ``phi`` runs over the shape function,
    its ``nd`` derivatives and its convective derivative, ``m`` indexes the
    operator's own components and ``c`` the local field component.
    """

    def __init__(self, nd):
        ns = nd * (nd + 1) // 2
        nc = nd + ns + 1
        S = nd + 2
        self.nd, self.nc, self.S = nd, nc, S
        Es = _voigt_basis(nd)
        self.U = np.zeros((S, nd, nc))
        self.GU = np.zeros((S, nd, nd, nc))
        self.ST = np.zeros((S, nd, nd, nc))
        self.DIVS = np.zeros((S, nd, nc))
        self.P = np.zeros((S, 1, nc))
        self.GP = np.zeros((S, nd, nc))
        self.DIVU = np.zeros((S, 1, nc))
        self.CONV = np.zeros((S, nd, nc))
        self.P[0, 0, nd + ns] = 1.0
        for i in range(nd):
            self.U[0, i, i] = 1.0
            self.GP[1 + i, i, nd + ns] = 1.0
            self.DIVU[1 + i, 0, i] = 1.0
            self.CONV[S - 1, i, i] = 1.0
            for j in range(nd):
                self.GU[1 + j, i, j, i] = 1.0
                self.ST[0, i, j, nd:nd + ns] = Es[i, j]
                self.DIVS[1 + j, i, nd:nd + ns] += Es[i, j]
        self.GU = self.GU.reshape(S, nd * nd, nc)
        self.ST = self.ST.reshape(S, nd * nd, nc)
        g = self.GU.reshape(S, nd, nd, nc)
        self.EPS = (0.5 * (g + np.swapaxes(g, 1, 2))).reshape(S, nd * nd, nc)

    @staticmethod
    def pair(A, B):
        return np.einsum("smc,tmd->stcd", A, B)

    def blocks(self, rho, mu, tau2, tau3, dt, a0, transient):
        """``(G0, G1)`` with element matrix ``sum_st Phi_st (G0 + kappa G1)_st``."""
        o = self
        R1 = -rho * o.CONV + o.DIVS - o.GP
        Ulin = rho * o.CONV
        T1 = -rho * o.CONV + 2.0 * mu * o.DIVS - o.GP
        if transient:
            R1 = R1 - (rho * a0 / dt) * o.U
            Ulin = Ulin + (rho * a0 / dt) * o.U
            T1 = T1 + (rho / dt) * o.U
        SS = (1.0 - tau2 / (2.0 * mu)) * o.ST + tau2 * o.EPS
        G0 = o.pair(o.U, Ulin) + o.pair(o.GU, SS) - o.pair(o.DIVU, o.P - tau3 * o.DIVU) \
            + o.pair(o.ST, SS - 2.0 * mu * o.EPS) + o.pair(o.P, o.DIVU)
        G1 = o.pair(T1, R1)
        return G0, G1, T1


@lru_cache(maxsize=None)
def _selectors(nd) -> _Selectors:
    return _Selectors(nd)


def fluid_element_matrices(c, uh, usub_n, fq, dNdx, wdet, tau1, N, prm, nd, transient):
    """Element matrices ``K_e`` and loads ``F_e`` of one fixed-point pass.

    With the convective velocity frozen the element residual is affine,
    ``R_e = K_e x_e + F_e``, so the matrices are built directly rather than
    by differentiating the residual. Arguments are batched over elements as
    for the residual kernel.
    """
    sel = _selectors(nd)
    rho, mu, tau2, tau3, dt, a0 = (float(v) for v in prm)
    ne, nq, nloc = dNdx.shape[:3]
    nc, S = sel.nc, sel.S
    cq = np.einsum("qa,eai->eqi", N, c)
    phi = np.empty((ne, nq, S, nloc))
    phi[:, :, 0] = N
    phi[:, :, 1:1 + nd] = np.swapaxes(dNdx, 2, 3)
    phi[:, :, S - 1] = np.einsum("eqi,eqai->eqa", cq, dNdx)
    wphi = (wdet[:, :, None, None] * phi).reshape(ne, nq, S * nloc)
    Phi = np.matmul(np.swapaxes(wphi, 1, 2), phi.reshape(ne, nq, S * nloc))
    Phi = Phi.reshape(ne, S, nloc, S, nloc).transpose(0, 2, 4, 1, 3).reshape(ne * nloc * nloc, S * S)
    G0, G1, T1 = sel.blocks(rho, mu, tau2, tau3, dt, a0, transient)
    G0 = G0.reshape(S * S, nc * nc)
    G1 = G1.reshape(S * S, nc * nc)
    r10 = rho * fq
    if transient:
        uhq = np.einsum("qa,eai->eqi", N, uh)
        r10 = r10 + rho * uhq / dt
        kap = 1.0 / (rho / dt + 1.0 / tau1)
        us0 = kap[:, None, None] * (r10 + rho * usub_n / dt)
        # the rho u_sub / dt part enters through T1
        U0 = -rho * uhq / dt - rho * fq - rho * usub_n / dt
    else:
        kap = np.asarray(tau1, dtype=float)
        us0 = kap[:, None, None] * r10
        U0 = -rho * fq
    K = (Phi @ G0).reshape(ne, nloc * nloc, nc * nc) + kap[:, None, None] * (Phi @ G1).reshape(ne, nloc * nloc, nc * nc)
    K = K.reshape(ne, nloc, nloc, nc, nc).transpose(0, 1, 3, 2, 4).reshape(ne, nloc * nc, nloc * nc)
    sel_u = np.moveaxis(sel.U, 1, 0).reshape(nd, S * nc)
    sel_t = np.moveaxis(T1, 1, 0).reshape(nd, S * nc)
    h = (U0.reshape(-1, nd) @ sel_u + us0.reshape(-1, nd) @ sel_t).reshape(ne, nq * S, nc)
    wphi = wphi.reshape(ne, nq, S, nloc).reshape(ne, nq * S, nloc)
    F = np.matmul(np.swapaxes(wphi, 1, 2), h).reshape(ne, nloc * nc)
    return K, F


# --------------------------------------------------------------------------
# state and driver
# --------------------------------------------------------------------------

@dataclass
class PicardConfig:
    tol: float = 1e-7
    max_iters: int = 30


@dataclass
class FluidReport:
    converged: bool
    iterations: int
    changes: List[float] = field(default_factory=list)
    seconds: float = 0.0
    message: str = ""


@dataclass
class FluidState:
    """``x`` is the current iterate; ``u_hist`` holds ``u^n, u^{n-1}``."""

    dofs: DofMap
    x: np.ndarray
    u_hist: np.ndarray
    u_dom: np.ndarray
    step: int = 0
    time: float = 0.0

    @property
    def u(self):
        return self.dofs.field_view(self.x, "v")

    @property
    def s(self):
        return self.dofs.field_view(self.x, "s")

    @property
    def p(self):
        return self.dofs.field_view(self.x, "p")[:, 0]


class _DirichletSet:
    def __init__(self, nodes, comps, value):
        self.nodes = np.asarray(nodes, dtype=np.int64)
        self.comps = tuple(comps)
        self.value = value


class FluidSolver:
    """Time stepping of the three-field fluid on ``mesh``.

    The mesh coordinates may be moved between steps (or between coupling
    iterations) by the caller; ``state.u_dom`` must then hold the nodal mesh
    velocity.
    """

    def __init__(self, mesh: Mesh, mat: FluidMaterial, picard: Optional[PicardConfig] = None,
                 linear: Optional[LinearSolverConfig] = None, convection: bool = True,
                 body_force: Optional[Callable] = None, assembly_workers: int = 1):
        nd = mesh.dim
        if len(mat.body_force) != nd:
            mat.body_force = tuple(mat.body_force[:nd]) + (0.0,) * max(0, nd - len(mat.body_force))
        self.mesh = mesh
        self.mat = mat
        self.nd = nd
        self.picard = picard or PicardConfig()
        self.linear = linear or LinearSolverConfig()
        self.convection = convection
        self.body_force = body_force
        self.workers = assembly_workers
        self.dofs = DofMap(mesh.n_nodes, three_field_layout(nd))
        self.edofs = self.dofs.element_dofs(mesh.cells)
        self.asm = Assembler(self.edofs, self.dofs.n_dof)
        self.quad = quadrature_for(mesh.kind, default_degree(mesh.ref))
        nq = len(self.quad)
        self.state = FluidState(self.dofs, np.zeros(self.dofs.n_dof), np.zeros((2, mesh.n_nodes, nd)),
                                np.zeros((mesh.n_nodes, nd)))
        self.store = sgs.SubscaleStore(mesh.n_cells, nq, nd, levels=1)
        self._dirichlet: List[_DirichletSet] = []
        self.pin_pressure: Optional[int] = None
        self._last_c = None
        # factors reused by the passes of one time step
        self.reuse_factorization = False
        self._factor = ReusableFactorization(self.linear)

    # ---------------- boundary data
    def fix(self, where, comps: Sequence[int] = None, value=0.0) -> int:
        """Prescribe velocity components; returns a handle for
        :meth:`update_bc`. ``value`` may be ``value(t, x) -> (n, ncomps)``."""
        nodes = self.mesh.boundary_nodes(where) if isinstance(where, str) else np.asarray(where, dtype=np.int64)
        comps = tuple(range(self.nd)) if comps is None else tuple(comps)
        self._dirichlet.append(_DirichletSet(nodes, comps, value))
        return len(self._dirichlet) - 1

    def update_bc(self, handle: int, value):
        self._dirichlet[handle].value = value

    def set_pressure_pin(self, node: Optional[int] = 0):
        self.pin_pressure = node

    def _bc_arrays(self, t):
        dofs, vals = [], []
        for bc in self._dirichlet:
            if callable(bc.value):
                v = np.asarray(bc.value(t, self.mesh.nodes[bc.nodes]), float).reshape(len(bc.nodes), len(bc.comps))
            else:
                v = np.broadcast_to(np.asarray(bc.value, float), (len(bc.nodes), len(bc.comps)))
            for k, c in enumerate(bc.comps):
                dofs.append(self.dofs.dofs("v", bc.nodes, c))
                vals.append(v[:, k])
        if self.pin_pressure is not None:
            dofs.append(self.dofs.dofs("p", [self.pin_pressure], 0))
            vals.append(np.zeros(1))
        if not dofs:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        d, v = np.concatenate(dofs), np.concatenate(vals)
        # later sets win on shared dofs
        d_rev, idx = np.unique(d[::-1], return_index=True)
        return d_rev, v[::-1][idx]

    # ---------------- assembly
    def _inputs(self, x, c_nodal, dt):
        mesh = self.mesh
        geo = element_geometry(mesh, self.quad)
        h = element_diameters(mesh)
        cn = np.linalg.norm(c_nodal, axis=1)[mesh.cells].max(axis=1)
        tau1, tau2, tau3 = tau_fluid(h, self.mat, cn, mesh.ref.order)
        st = self.state
        transient = dt is not None
        if transient:
            first = st.step == 0
            a0 = 1.0 if first else 1.5
            uh = st.u_hist[0] if first else 2.0 * st.u_hist[0] - 0.5 * st.u_hist[1]
        else:
            a0, uh = 0.0, np.zeros_like(st.u_hist[0])
        if self.body_force is not None:
            xq = np.einsum("qa,eai->eqi", geo.N, mesh.nodes[mesh.cells])
            fq = np.asarray(self.body_force(xq.reshape(-1, self.nd)), float).reshape(xq.shape)
        else:
            fq = np.broadcast_to(np.asarray(self.mat.body_force), (mesh.n_cells, len(self.quad), self.nd))
        prm = np.array([self.mat.rho, self.mat.mu, tau2, tau3, dt if transient else 1.0, a0])
        args = (x[self.edofs], c_nodal[mesh.cells], uh[mesh.cells], self.store.hist[0], fq,
                geo.dNdx, geo.wdetJ, tau1, geo.N, prm)
        return args, transient

    def residual(self, x, c_nodal, dt, with_tangent=True):
        """Assembled residual; with the tangent the element matrices come from
        the affine form of the frozen-convection problem and no sub-scale data
        is returned."""
        args, transient = self._inputs(x, c_nodal, dt)
        if with_tangent:
            Ke, Fe = fluid_element_matrices(*args[1:], nd=self.nd, transient=transient)
            Re = np.einsum("eij,ej->ei", Ke, x[self.edofs]) + Fe
            data = self.asm.values_parallel(Ke, self.workers) if self.workers > 1 else self.asm.values(Ke)
            return self.asm.vector(Re), data, None
        Re, (_, aux) = _fluid_kernel(self.nd, transient, False)(*(jnp.asarray(a) for a in args))
        return self.asm.vector(np.asarray(Re)), None, aux

    def convective_velocity(self, u=None):
        if not self.convection:
            return np.zeros((self.mesh.n_nodes, self.nd))
        u = self.state.u if u is None else u
        return u - self.state.u_dom

    def system(self, dt=None, c_nodal=None) -> SparseSystem:
        c_nodal = self.convective_velocity() if c_nodal is None else c_nodal
        R, data, _ = self.residual(self.state.x, c_nodal, dt)
        return SparseSystem(self.asm._csr(data), -R)

    def picard_pass(self, dt, c_nodal=None) -> float:
        """One linear solve with frozen convection; returns the relative
        velocity change."""
        st = self.state
        t = st.time + (dt or 0.0)
        c_nodal = self.convective_velocity() if c_nodal is None else c_nodal
        x = st.x.copy()
        bdofs, bvals = self._bc_arrays(t)
        x[bdofs] = bvals
        R, data, aux = self.residual(x, c_nodal, dt)
        sysm = DirichletMasker(self.asm, bdofs).apply(data, -R, 0.0)
        if self.reuse_factorization:
            dx, _ = self._factor.solve(sysm)
        else:
            dx, _ = solve_linear(sysm, self.linear)
        x_new = x + dx
        u_old = st.u
        st.x = x_new
        self._last_c = c_nodal
        du = np.linalg.norm(st.u - u_old)
        # a change at round-off of the whole iterate counts as none, so a
        # flow at rest (u ~ 1e-16) does not cycle on noise
        if du <= 1e2 * np.finfo(float).eps * np.linalg.norm(x_new):
            return 0.0
        return float(du / np.linalg.norm(st.u))

    def solve(self, dt) -> FluidReport:
        """Fixed-point iterations until the relative velocity change drops
        below the tolerance."""
        t0 = time.perf_counter()
        rep = FluidReport(False, 0)
        for k in range(self.picard.max_iters):
            ch = self.picard_pass(dt)
            rep.iterations += 1
            rep.changes.append(ch)
            if ch < self.picard.tol or not self.convection:
                rep.converged = True
                break
        else:
            rep.message = f"fixed point did not converge in {self.picard.max_iters} passes"
        rep.seconds = time.perf_counter() - t0
        return rep

    def subscales(self, dt):
        """Sub-scales ``(u_sub, s_sub, p_sub, div u)`` at the current iterate."""
        c = self._last_c if self._last_c is not None else self.convective_velocity()
        _, _, aux = self.residual(self.state.x, c, dt, with_tangent=False)
        return tuple(np.asarray(a) for a in aux)

    def commit(self, dt):
        self._factor.reset()
        st = self.state
        if dt is not None:
            usub, ssub, psub, _ = self.subscales(dt)
            self.store.set_current(usub, voigt_from_sym(ssub, self.nd), psub)
            self.store.rotate()
            st.time += dt
        st.u_hist = np.stack([st.u, st.u_hist[0]])
        st.step += 1

    def step(self, dt) -> FluidReport:
        rep = self.solve(dt)
        if not rep.converged:
            raise StepFailure(f"fluid step {self.state.step + 1} failed: {rep.message}", rep)
        self.commit(dt)
        return rep

    def nodal_stress(self):
        """Cauchy stress ``-p I + s`` at the nodes, ``(n_nodes, nd, nd)``."""
        S = sym_from_voigt(self.state.s, self.nd, np)
        return S - self.state.p[:, None, None] * np.eye(self.nd)

    def boundary_force(self, tag: str) -> np.ndarray:
        """Force exerted by the fluid on the boundary ``tag`` (on the body
        beyond it): ``-int sigma n_fl ds`` with nodal stresses interpolated."""
        from .mesh import face_geometry
        fg = face_geometry(self.mesh, tag)
        sig = self.nodal_stress()
        sq = np.einsum("qa,faij->fqij", fg.N, sig[fg.nodes])
        return -np.einsum("fq,fqij,fqj->i", fg.wds, sq, fg.normal)


def assemble_fluid(solver: FluidSolver, dt, convective_velocity=None) -> SparseSystem:
    return solver.system(dt, convective_velocity)


def fluid_time_step(solver: FluidSolver, dt) -> Tuple[FluidState, FluidReport]:
    rep = solver.step(dt)
    return solver.state, rep

"""Updated-Lagrangian three-field (displacement, deviatoric stress, pressure)
neo-Hookean solid with dynamic sub-grid scales.

Unknowns per node: displacement ``d`` (total, from the initial
configuration), deviatoric Cauchy stress ``s`` in symmetric storage and
pressure ``p`` (positive in traction). Derivatives are taken with respect to
the last converged configuration; the deformation gradient is accumulated
multiplicatively at the quadrature points.

The element residual is written once in jax; its tangent is the exact
derivative obtained by forward-mode differentiation.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import jax
import jax.numpy as jnp
import numpy as np

from . import sgs
from .errors import ConfigError, KinematicsError, SolverError, StepFailure
from .fem import (Assembler, DirichletMasker, DofMap, LinearSolverConfig, SparseSystem,
                  SolverReport, n_sym, solve_linear, three_field_layout)
from .mesh import Mesh, default_degree, element_diameters, element_geometry, face_geometry, quadrature_for
from .tensors import dev, sym, sym_from_voigt, voigt_from_sym, voigt_row


class _Constraint:
    """Marker returned for the pressure of an incompressible material."""

    def __repr__(self):
        return "CONSTRAINT"


CONSTRAINT = _Constraint()


@dataclass
class SolidMaterial:
    rho: float
    mu: float
    inv_lambda: float = 0.0
    body_force: Tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        bad = []
        if not self.rho > 0:
            bad.append(f"solid density must be positive, got {self.rho}")
        if not self.mu > 0:
            bad.append(f"shear modulus must be positive, got {self.mu}")
        if not self.inv_lambda >= 0:
            bad.append(f"inv_lambda must be non-negative, got {self.inv_lambda}")
        if bad:
            raise ConfigError("; ".join(bad), bad)
        self.body_force = tuple(float(v) for v in self.body_force)

    @classmethod
    def from_young(cls, E, nu, rho, body_force=(0.0, 0.0)):
        mu = E / (2.0 * (1.0 + nu))
        if not 0.0 < nu <= 0.5:
            raise ConfigError(f"poisson ratio must lie in (0, 0.5], got {nu}", [f"poisson={nu}"])
        # 1/lambda, which vanishes in the incompressible limit nu = 1/2
        inv_lam = (1.0 + nu) * (1.0 - 2.0 * nu) / (E * nu)
        return cls(rho, mu, inv_lam, body_force)

    @property
    def lam(self):
        return np.inf if self.inv_lambda == 0 else 1.0 / self.inv_lambda


def stress_split(b, J, mat: SolidMaterial):
    """Deviatoric stress and pressure of the neo-Hookean law.

    Returns ``(s, p)``; ``p`` is :data:`CONSTRAINT` when the material is
    incompressible (``inv_lambda == 0``).
    """
    b = np.asarray(b, dtype=float)
    if not J > 0:
        raise KinematicsError(f"non-positive Jacobian J={J}")
    nd = b.shape[-1]
    tr = np.trace(b)
    s = mat.mu / J * (b - tr / nd * np.eye(nd))
    if mat.inv_lambda == 0:
        return s, CONSTRAINT
    p = (mat.lam * np.log(J) - mat.mu + mat.mu * tr / nd) / J
    return s, p


def linearize_J(J, F_inv, grad_delta_d):
    """Directional derivatives of ``J`` and ``ln J`` along a displacement
    increment with material gradient ``grad_delta_d``."""
    dl = float(np.trace(np.asarray(F_inv) @ np.asarray(grad_delta_d)))
    return J * dl, dl


def bdf2_acceleration(d_new, d_n, d_nm1, d_nm2, dt):
    return (2.0 * np.asarray(d_new) - 5.0 * np.asarray(d_n) + 4.0 * np.asarray(d_nm1) - np.asarray(d_nm2)) / dt ** 2


def bdf1_acceleration(d_new, d_n, d_nm1, dt):
    return (np.asarray(d_new) - 2.0 * np.asarray(d_n) + np.asarray(d_nm1)) / dt ** 2


def tau_solid(h, mat: SolidMaterial, order: int = 1, c1=4.0, c2=0.1, c3=0.1):
    """Stabilization parameters; ``h`` is the element diameter, divided here
    by the interpolation order."""
    h = np.asarray(h, dtype=float) / order
    return h ** 2 / (c1 * mat.mu), c2 * 2.0 * mat.mu, c3 * 2.0 * mat.mu


@dataclass
class KinematicsQP:
    """Total deformation gradient at every quadrature point, ``(ne, nq, nd, nd)``."""

    F: np.ndarray

    @classmethod
    def identity(cls, ne, nq, nd):
        return cls(np.broadcast_to(np.eye(nd), (ne, nq, nd, nd)).copy())

    @property
    def J(self):
        return np.linalg.det(self.F)

    @property
    def b(self):
        return self.F @ np.swapaxes(self.F, -1, -2)

    @property
    def F_inv(self):
        return np.linalg.inv(self.F)

    def copy(self):
        return KinematicsQP(self.F.copy())


def incremental_gradient(mesh: Mesh, delta_d, quad=None, coords=None):
    """``f = I + grad_{x^n} delta_d`` at the quadrature points."""
    g = element_geometry(mesh, quad, coords)
    G = np.einsum("eai,eqaj->eqij", np.asarray(delta_d)[mesh.cells], g.dNdx)
    return np.eye(mesh.dim) + G


def update_kinematics(kin: KinematicsQP, mesh: Mesh, delta_d, quad=None, coords=None) -> KinematicsQP:
    """Compose the increment from the last converged configuration (the
    current ``mesh`` coordinates) with the stored total gradient."""
    f = incremental_gradient(mesh, delta_d, quad, coords)
    detf = np.linalg.det(f)
    if not np.all(detf > 0):
        bad = np.unique(np.nonzero(~(detf > 0))[0])
        raise KinematicsError(f"incremental deformation inverts {len(bad)} element(s)", elements=bad.tolist())
    return KinematicsQP(f @ kin.F)


# --------------------------------------------------------------------------
# element kernel
# --------------------------------------------------------------------------

# parameter vector layout
_P_RHO, _P_MU, _P_IL, _P_T2, _P_T3, _P_DT, _P_GAM = range(7)
_P_F = 7


def _solid_element(ue, dn, ath, dNdX, wdet, Fn, thsub, tau1, N, prm, nd, inertia, dynamic):
    ns = nd * (nd + 1) // 2
    nloc = N.shape[1]
    nc = nd + ns + 1
    U = ue.reshape(nloc, nc)
    d, sv, pv = U[:, :nd], U[:, nd:nd + ns], U[:, nd + ns]
    rho, mu, il = prm[_P_RHO], prm[_P_MU], prm[_P_IL]
    tau2, tau3, dt, gam = prm[_P_T2], prm[_P_T3], prm[_P_DT], prm[_P_GAM]
    fb = prm[_P_F:_P_F + nd]
    I = jnp.eye(nd)

    f = I + jnp.einsum("ai,qaj->qij", d - dn, dNdX)
    detf = jnp.linalg.det(f)
    finv = jnp.linalg.inv(f)
    F = f @ Fn
    J = jnp.linalg.det(F)
    b = F @ jnp.swapaxes(F, -1, -2)
    g = jnp.einsum("qak,qkj->qaj", dNdX, finv)
    w = wdet * detf

    Sn = sym_from_voigt(sv, nd)                       # (nloc, nd, nd)
    S = jnp.einsum("qa,aij->qij", N, Sn)
    P = N @ pv
    divS = jnp.einsum("aij,qaj->qi", Sn, g)
    gradP = jnp.einsum("a,qai->qi", pv, g)
    if inertia:
        acc = N @ ((gam * d - ath) / dt ** 2)
    else:
        acc = jnp.zeros_like(divS)
    trb = jnp.trace(b, axis1=-2, axis2=-1)
    devb = dev(b, nd)
    lnJ = jnp.log(J)
    Jm = J / (2.0 * mu)

    r1 = rho * fb - rho * acc + divS + gradP
    r2 = -Jm[:, None, None] * S + 0.5 * devb
    r3 = -(il * J * P - lnJ - mu * il * (trb / nd - 1.0))
    if dynamic:
        dsub, rho_a, _ = sgs.solid_subscales(r1, tau1, rho, dt, thsub, gam)
    else:
        dsub, rho_a = tau1 * r1, jnp.zeros_like(r1)
    ssub = tau2 * r2
    psub = tau3 * r3

    stot = S + ssub + (P + psub)[:, None, None] * I
    Rv = jnp.einsum("qa,qi->qai", N, rho * acc - rho * fb + rho_a) + jnp.einsum("qij,qaj->qai", stot, g)

    bg = jnp.einsum("qij,qaj->qai", b, g)
    db = jnp.einsum("qi,qai->qa", dsub, bg)
    dg = jnp.einsum("qi,qai->qa", dsub, g)
    T = sym(jnp.einsum("qi,qaj->qaij", dsub, bg)) \
        - (db / nd)[..., None, None] * I \
        - (Jm[:, None] * dg)[..., None, None] * S[:, None]
    M = N[..., None, None] * (Jm[:, None, None] * (S + ssub) - 0.5 * devb)[:, None] + T
    Rs = 2.0 * mu * voigt_row(M, nd)

    qpart = -(J * P * il - 1.0)[:, None, None] * g + (2.0 * mu * il / nd) * bg
    Rp = 2.0 * mu * (N * (-r3 + J * il * psub)[:, None] + jnp.einsum("qi,qai->qa", dsub, qpart))

    Rq = jnp.concatenate([Rv, Rs, Rp[..., None]], axis=-1)   # (nq, nloc, nc)
    Re = jnp.einsum("q,qac->ac", w, Rq).reshape(-1)
    aux = (dsub, ssub, psub, J, r1)
    return Re, (Re, aux)


@lru_cache(maxsize=None)
def _solid_kernel(nd, inertia, dynamic, tangent=True):
    fn = partial(_solid_element, nd=nd, inertia=inertia, dynamic=dynamic)
    if tangent:
        fn = jax.jacfwd(fn, has_aux=True)
    return jax.jit(jax.vmap(fn, in_axes=(0, 0, 0, 0, 0, 0, 0, 0, None, None)))


# --------------------------------------------------------------------------
# state and driver
# --------------------------------------------------------------------------

@dataclass
class NewtonConfig:
    tol: float = 1e-8
    max_iters: int = 25
    floor: float = 1e-12
    max_halvings: int = 6


@dataclass
class StepReport:
    converged: bool
    iterations: int
    residuals: List[float] = field(default_factory=list)
    seconds: float = 0.0
    message: str = ""


@dataclass
class SolidState:
    """Nodal unknowns and displacement history.

    ``x`` is the current iterate in node-major layout; ``d_hist`` holds
    ``d^n, d^{n-1}, d^{n-2}``.
    """

    dofs: DofMap
    x: np.ndarray
    d_hist: np.ndarray
    a: np.ndarray
    step: int = 0
    time: float = 0.0

    @property
    def nd(self):
        return self.d_hist.shape[-1]

    @property
    def d(self):
        return self.dofs.field_view(self.x, "v")

    @property
    def s(self):
        return self.dofs.field_view(self.x, "s")

    @property
    def p(self):
        return self.dofs.field_view(self.x, "p")[:, 0]

    @property
    def d_n(self):
        return self.d_hist[0]

    def velocity(self, dt):
        """BDF2 velocity of the current iterate (BDF1 on the first step)."""
        if self.step == 0:
            return (self.d - self.d_hist[0]) / dt
        return (3.0 * self.d - 4.0 * self.d_hist[0] + self.d_hist[1]) / (2.0 * dt)


BCValue = Union[float, Sequence[float], Callable]


class SolidSolver:
    """Time stepping of the three-field solid.

    ``mode`` is ``dynamic`` (BDF2 inertia) or ``static``; ``subscales`` is
    ``dynamic`` or ``quasi-static``. Dirichlet conditions act on displacement
    components; tractions are force per unit area of the last converged
    configuration.
    """

    def __init__(self, mesh: Mesh, mat: SolidMaterial, mode: str = "dynamic", subscales: str = "dynamic",
                 newton: Optional[NewtonConfig] = None, linear: Optional[LinearSolverConfig] = None,
                 assembly_workers: int = 1):
        if mode not in ("dynamic", "static"):
            raise ConfigError(f"unknown solid mode {mode!r}")
        if subscales not in ("dynamic", "quasi-static"):
            raise ConfigError(f"unknown sub-scale model {subscales!r}")
        if len(mat.body_force) != mesh.dim:
            mat.body_force = tuple(mat.body_force[: mesh.dim]) + (0.0,) * max(0, mesh.dim - len(mat.body_force))
        self.mesh = mesh
        self.mat = mat
        self.mode = mode
        self.subscales = subscales if mode == "dynamic" else "quasi-static"
        self.newton = newton or NewtonConfig()
        self.linear = linear or LinearSolverConfig()
        self.workers = assembly_workers
        nd = mesh.dim
        self.nd = nd
        self.X0 = mesh.nodes.copy()
        self.dofs = DofMap(mesh.n_nodes, three_field_layout(nd))
        self.edofs = self.dofs.element_dofs(mesh.cells)
        self.asm = Assembler(self.edofs, self.dofs.n_dof)
        self.quad = quadrature_for(mesh.kind, default_degree(mesh.ref))
        nq = len(self.quad)
        zeros = np.zeros((3, mesh.n_nodes, nd))
        self.state = SolidState(self.dofs, np.zeros(self.dofs.n_dof), zeros, np.zeros((mesh.n_nodes, nd)))
        self.kin = KinematicsQP.identity(mesh.n_cells, nq, nd)
        self.store = sgs.SubscaleStore(mesh.n_cells, nq, nd, levels=3)
        self._dirichlet: List[tuple] = []
        self._tractions: Dict[str, object] = {}
        self.load_factor: Callable[[float], float] = lambda t: 1.0
        self._step_cache = None
        self._res_scale = 0.0
        self._last_aux = None

    # ---------------- boundary data
    def fix(self, where, comps: Sequence[int] = None, value: BCValue = 0.0):
        """Prescribe displacement components on a boundary tag or node list.
        ``value`` may be a callable ``value(t, X0) -> (n, len(comps))``."""
        nodes = self.mesh.boundary_nodes(where) if isinstance(where, str) else np.asarray(where, dtype=np.int64)
        comps = tuple(range(self.nd)) if comps is None else tuple(comps)
        self._dirichlet.append((nodes, comps, value))
        self._bc_cache = None

    def set_traction(self, tag: str, value):
        """Traction on ``tag``: a constant vector, a callable of time, or
        nodal values ``(n_nodes, nd)`` over the whole mesh."""
        if tag not in self.mesh.boundary:
            raise ConfigError(f"unknown boundary tag {tag!r}")
        self._tractions[tag] = value

    def _bc_arrays(self, t):
        dofs, vals = [], []
        for nodes, comps, value in self._dirichlet:
            if callable(value):
                v = np.asarray(value(t, self.X0[nodes]), float).reshape(len(nodes), len(comps))
            else:
                v = np.broadcast_to(np.asarray(value, float), (len(nodes), len(comps)))
            for k, c in enumerate(comps):
                dofs.append(self.dofs.dofs("v", nodes, c))
                vals.append(v[:, k])
        if not dofs:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        d = np.concatenate(dofs)
        v = np.concatenate(vals)
        d, idx = np.unique(d, return_index=True)
        return d, v[idx]

    # ---------------- per-step geometry
    def _begin_step(self, dt):
        if self._step_cache is not None:
            return self._step_cache
        mesh = self.mesh
        geo = element_geometry(mesh, self.quad)
        h = element_diameters(mesh)
        t1, t2, t3 = tau_solid(h, self.mat, mesh.ref.order)
        first = self.state.step == 0
        gam = sgs.GAMMA_BDF1 if first else sgs.GAMMA_BDF2
        dh = self.state.d_hist
        ath = (2.0 * dh[0] - dh[1]) if first else (5.0 * dh[0] - 4.0 * dh[1] + dh[2])
        sh = self.store.hist
        thsub = sgs.theta_history(sh[0], sh[1], sh[2], first)
        faces = {tag: face_geometry(mesh, tag) for tag in self._tractions}
        prm = np.zeros(_P_F + self.nd)
        prm[[_P_RHO, _P_MU, _P_IL, _P_T2, _P_T3, _P_DT, _P_GAM]] = [
            self.mat.rho, self.mat.mu, self.mat.inv_lambda, t2, t3,
            dt if self.mode == "dynamic" else 1.0, gam]
        prm[_P_F:] = self.mat.body_force
        self._step_cache = dict(geo=geo, tau1=t1, ath=ath, thsub=thsub, faces=faces, prm=prm, dt=dt,
                                dn=dh[0].copy())
        self._res_scale = 0.0
        return self._step_cache

    def external_force(self, t: float) -> np.ndarray:
        c = self._step_cache
        fext = np.zeros(self.dofs.n_dof)
        lf = self.load_factor(t)
        for tag, value in self._tractions.items():
            if tag not in c["faces"]:
                c["faces"][tag] = face_geometry(self.mesh, tag)
            fg = c["faces"][tag]
            if callable(value):
                value = value(t)
            value = np.asarray(value, dtype=float)
            if value.ndim == 2:
                tq = np.einsum("qa,fai->fqi", fg.N, value[fg.nodes])
            else:
                tq = np.broadcast_to(value, fg.wds.shape + (self.nd,))
            fa = lf * np.einsum("qa,fq,fqi->fai", fg.N, fg.wds, tq)
            idx = self.dofs.dofs("v", fg.nodes.ravel()).reshape(fa.shape)
            np.add.at(fext, idx, fa)
        return fext

    def _kernel_inputs(self, x):
        c = self._step_cache
        cells = self.mesh.cells
        return (jnp.asarray(x[self.edofs]), jnp.asarray(c["dn"][cells]), jnp.asarray(c["ath"][cells]),
                jnp.asarray(c["geo"].dNdx), jnp.asarray(c["geo"].wdetJ), jnp.asarray(self.kin.F),
                jnp.asarray(c["thsub"]), jnp.asarray(c["tau1"]), jnp.asarray(c["geo"].N), jnp.asarray(c["prm"]))

    def residual(self, x, t, dt=None, with_tangent=True):
        """Assembled residual (internal minus external) and optionally the
        tangent data on the fixed CSR pattern; also returns the aux tuple."""
        self._begin_step(dt if dt is not None else self._step_cache["dt"])
        kern = _solid_kernel(self.nd, self.mode == "dynamic", self.subscales == "dynamic", with_tangent)
        out = kern(*self._kernel_inputs(x))
        if with_tangent:
            Ke, (Re, aux) = out
            Ke = np.asarray(Ke)
            data = self.asm.values_parallel(Ke, self.workers) if self.workers > 1 else self.asm.values(Ke)
        else:
            Re, (_, aux) = out
            data = None
        Re = np.asarray(Re)
        R = self.asm.vector(Re) - self.external_force(t)
        Rabs = self.asm.vector(np.abs(Re))
        return R, data, aux, Rabs

    def system(self, x=None, t=None, dt=1.0) -> SparseSystem:
        """Unconstrained Newton system ``K dx = -R`` at iterate ``x``."""
        x = self.state.x if x is None else x
        self._begin_step(dt)
        R, data, _, _ = self.residual(x, self.state.time + dt if t is None else t)
        return SparseSystem(self.asm._csr(data), -R)

    def predictor(self):
        """Linear extrapolation of the displacement for a new step."""
        st = self.state
        x = st.x.copy()
        if self.mode == "dynamic" and st.step > 0:
            self.dofs.set_field(x, "v", 2.0 * st.d_hist[0] - st.d_hist[1])
        return x

    def solve(self, dt: float, x0=None) -> StepReport:
        """Newton iterations for the step ending at ``time + dt``; leaves the
        converged iterate in ``state.x`` without committing."""
        t0 = time.perf_counter()
        self._begin_step(dt)
        t = self.state.time + dt
        x = (self.state.x if x0 is None else x0).copy()
        bdofs, bvals = self._bc_arrays(t)
        x[bdofs] = bvals
        masker = DirichletMasker(self.asm, bdofs)
        free = np.ones(self.dofs.n_dof, dtype=bool)
        free[bdofs] = False
        cfg = self.newton
        report = StepReport(False, 0)
        R, data, aux, Rabs = self.residual(x, t)
        report.iterations = 1
        while True:
            rn = float(np.linalg.norm(R[free]))
            report.residuals.append(rn)
            self._res_scale = max(self._res_scale, rn)
            floor = cfg.floor * float(np.linalg.norm(Rabs[free]))
            if rn <= cfg.tol * self._res_scale or rn <= floor:
                report.converged = True
                break
            if report.iterations >= cfg.max_iters:
                report.message = f"no convergence after {cfg.max_iters} iterations (|R|={rn:.3e})"
                break
            sysm = masker.apply(data, -R, 0.0)
            try:
                dx, _ = solve_linear(sysm, self.linear)
            except SolverError as exc:
                report.message = str(exc)
                break
            step = 1.0
            for _ in range(cfg.max_halvings):
                xt = x + step * dx
                Rt, dt_data, auxt, Rabst = self.residual(xt, t)
                Jq = np.asarray(auxt[3])
                if np.all(Jq > 0) and np.all(np.isfinite(Rt)):
                    break
                step *= 0.5
            else:
                report.message = "iterate inverts elements"
                break
            x, R, data, aux, Rabs = xt, Rt, dt_data, auxt, Rabst
            report.iterations += 1
        report.seconds = time.perf_counter() - t0
        self.state.x = x
        self._last_aux = aux
        return report

    def commit(self, dt: float):
        """Accept the current iterate: move the mesh, accumulate kinematics
        and rotate the displacement and sub-scale histories."""
        c = self._begin_step(dt)
        st = self.state
        d = st.d
        delta = d - st.d_hist[0]
        self.kin = update_kinematics(self.kin, self.mesh, delta, self.quad)
        first = st.step == 0
        if self.mode == "dynamic":
            gam = sgs.GAMMA_BDF1 if first else sgs.GAMMA_BDF2
            st.a = (gam * d - c["ath"]) / dt ** 2
        aux = self._last_aux
        if aux is not None:
            self.store.set_current(np.asarray(aux[0]), None, np.asarray(aux[2]))
            self.store.s = voigt_from_sym(np.asarray(aux[1]), self.nd)
        self.store.rotate()
        st.d_hist = np.stack([d, st.d_hist[0], st.d_hist[1]])
        self.mesh.nodes = self.X0 + d
        st.step += 1
        st.time += dt
        self._step_cache = None
        self._last_aux = None

    def step(self, dt: float) -> StepReport:
        """Predict, solve and commit one step; raises StepFailure on failure."""
        self._begin_step(dt)
        rep = self.solve(dt, self.predictor())
        if not rep.converged:
            self._step_cache = None
            raise StepFailure(f"solid step {self.state.step + 1} failed: {rep.message}", rep)
        self.commit(dt)
        return rep

    def nodal_stress(self):
        """Cauchy stress ``s + p I`` at the nodes, ``(n_nodes, nd, nd)``."""
        S = sym_from_voigt(self.state.s, self.nd, np)
        return S + self.state.p[:, None, None] * np.eye(self.nd)


def assemble_solid(solver: SolidSolver, x=None, dt=1.0) -> SparseSystem:
    return solver.system(x, dt=dt)


def solid_time_step(solver: SolidSolver, dt: float) -> Tuple[SolidState, StepReport]:
    rep = solver.step(dt)
    return solver.state, rep

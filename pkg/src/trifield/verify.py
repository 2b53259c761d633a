"""Acceptance suites.

Every check returns a :class:`CriterionResult` with a pass flag and the
numbers it was judged on. ``run_suite`` runs a named group of checks; the
``verify`` command prints their report.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import meshgen, presets, sgs
from .config import parse_config
from .errors import StepFailure, TrifieldError
from .fem import l2_error, lumped_mass
from .mesh import element_geometry, min_jacobian, ref_element
from .runner import build_simulation
from .solid import SolidMaterial, SolidSolver, stress_split

Echo = Optional[Callable[[str], None]]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: List[str] = field(default_factory=list)
    seconds: float = 0.0
    data: Dict[str, object] = field(default_factory=dict, repr=False)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name} ({self.seconds:.1f} s)"


def _say(echo: Echo, msg: str):
    if echo is not None:
        echo(msg)


def _finish(res: CriterionResult, t0: float) -> CriterionResult:
    res.seconds = time.perf_counter() - t0
    return res


def _cook_solver(n: int, kind: str = "tri3", mode: str = "static") -> SolidSolver:
    mesh = meshgen.cook_membrane(n, kind)
    cfg = presets.DEFAULTS["cook"]["solid"]
    s = SolidSolver(mesh, SolidMaterial(cfg["rho"], cfg["mu"], cfg["inv_lambda"]), mode=mode)
    s.fix("clamp")
    s.set_traction("load", (0.0, cfg["load"] / presets.COOK_LOAD_EDGE))
    return s


def _nearest(points, target) -> int:
    return int(np.argmin(np.linalg.norm(np.asarray(points) - np.asarray(target), axis=1)))


# --------------------------------------------------------------------------
# 1. kernel identities
# --------------------------------------------------------------------------

def _random_reference_points(ref, n, rng):
    if ref.geometry == "cube":
        return rng.uniform(-1.0, 1.0, (n, ref.dim))
    # uniform on the simplex via sorted-spacings barycentrics
    lam = rng.dirichlet(np.ones(ref.dim + 1), n)
    return lam[:, 1:]


def check_kernels(echo: Echo = None, seed: int = 0) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    res = CriterionResult(1, "kernel identities", True)

    pu, gs = 0.0, 0.0
    for kind in ("tri3", "tri6", "quad4", "tet4", "line2", "line3"):
        ref = ref_element(kind)
        N, dN = ref.eval(_random_reference_points(ref, 100, rng))
        pu = max(pu, float(np.abs(N.sum(axis=1) - 1.0).max()))
        gs = max(gs, float(np.linalg.norm(dN.sum(axis=1), axis=1).max()))
    ok = pu < 1e-12 and gs < 1e-10
    res.details.append(f"partition of unity max |sum N - 1| = {pu:.2e} (< 1e-12); "
                       f"gradient sum max = {gs:.2e} (< 1e-10)")
    res.passed &= ok

    mat = SolidMaterial(1.0, 1.0, 0.5)
    worst = 0.0
    for nd in (2, 3):
        for _ in range(500):
            A = rng.normal(size=(nd, nd))
            b = A @ A.T + 0.1 * np.eye(nd)
            J = float(np.sqrt(np.linalg.det(b)))
            s, _ = stress_split(b, J, mat)
            worst = max(worst, abs(np.trace(s)) / max(np.linalg.norm(s), 1e-300))
    ok = worst < 1e-12
    res.details.append(f"deviatoric trace max |tr s|/|s| over 1000 random SPD b = {worst:.2e} (< 1e-12)")
    res.passed &= ok

    sol = _cook_solver(4)
    sol.set_traction("load", (0.0, 0.0))
    sol._begin_step(1.0)
    R, _, _, _ = sol.residual(sol.state.x, 1.0, 1.0, with_tangent=False)
    rn = float(np.linalg.norm(R))
    res.details.append(f"undeformed equilibrium |R| = {rn:.2e} (machine zero)")
    res.passed &= rn < 1e-12

    # defining relation of the dynamic displacement sub-scale
    m = meshgen.cantilever(10, 2, "quad4")
    s = SolidSolver(m, SolidMaterial(100.0, 2.135e7, 0.0, (0.0, -2.0)))
    s.fix("clamp")
    dt = 1e-3
    worst = 0.0
    for _ in range(4):
        rep = s.solve(dt, s.predictor())
        if not rep.converged:
            res.details.append("sub-scale identity: step did not converge")
            res.passed = False
            break
        c = s._step_cache
        dsub, r1 = np.asarray(s._last_aux[0]), np.asarray(s._last_aux[4])
        gam = c["prm"][6]
        rho_a = s.mat.rho * (gam * dsub - c["thsub"]) / dt ** 2
        lhs = rho_a + dsub / c["tau1"][:, None, None]
        worst = max(worst, float(np.abs(lhs - r1).max() / max(np.abs(r1).max(), 1e-300)))
        s.commit(dt)
    res.details.append(f"sub-scale relation rho a_sub + d_sub/tau1 = R1: max rel. deviation {worst:.2e} (< 1e-12)")
    res.passed &= worst < 1e-12
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 2. tangent consistency
# --------------------------------------------------------------------------

def check_tangent(echo: Echo = None, seed: int = 1, n_dirs: int = 20) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    sol = _cook_solver(5)           # 50 triangles
    res = CriterionResult(2, "solid tangent vs central differences", True)
    # a deformed, stressed state: half the load step solved
    sol.load_factor = lambda t: 0.5
    rep = sol.solve(1.0)
    x = sol.state.x.copy()
    scale = np.empty_like(x)
    for name in ("v", "s", "p"):
        idx = sol.dofs.dofs(name)
        scale[idx] = max(float(np.abs(x[idx]).max()), 1e-12)
    t = sol.state.time + 1.0
    R0, data, _, _ = sol.residual(x, t)
    K = sol.asm._csr(data)
    worst = 0.0
    for _ in range(n_dirs):
        v = rng.normal(size=x.shape) * scale
        v /= np.linalg.norm(v / scale)
        eps = 1e-6
        Rp = sol.residual(x + eps * v, t, with_tangent=False)[0]
        Rm = sol.residual(x - eps * v, t, with_tangent=False)[0]
        fd = (Rp - Rm) / (2.0 * eps)
        Kv = K @ v
        worst = max(worst, float(np.linalg.norm(fd - Kv) / np.linalg.norm(Kv)))
    res.passed = bool(rep.converged and worst < 1e-5)
    res.details.append(f"{sol.mesh.n_cells} elements, {n_dirs} directions: max relative error {worst:.2e} (< 1e-5)")
    res.data["error"] = worst
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 3. Newton convergence rate
# --------------------------------------------------------------------------

def fit_order(r: np.ndarray) -> Tuple[float, float]:
    """Least-squares fit of ``log r_{k+1} = log C + q log r_k``; returns
    ``(q, C)``."""
    r = np.asarray(r, dtype=float)
    q, logc = np.polyfit(np.log(r[:-1]), np.log(r[1:]), 1)
    return float(q), float(np.exp(logc))


def check_newton(echo: Echo = None) -> CriterionResult:
    t0 = time.perf_counter()
    sol = _cook_solver(16)
    sol.newton.tol = 1e-14
    sol.load_factor = lambda t: 1.0
    rep = sol.solve(1.0)
    r = np.asarray(rep.residuals)
    # residuals at round-off level carry no rate information
    r = r[r > 1e2 * np.finfo(float).eps * r.max()]
    tail = r[-4:]
    q, C = fit_order(tail) if len(tail) >= 3 else (0.0, np.inf)
    res = CriterionResult(3, "superlinear Newton decay", bool(q >= 1.5 and len(tail) == 4))
    res.details.append("residuals: " + ", ".join(f"{v:.3e}" for v in rep.residuals))
    res.details.append(f"fit over the last 3 iterations: exponent {q:.2f} (>= 1.5), C = {C:.3e}")
    res.data.update(exponent=q, C=C, residuals=list(rep.residuals))
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 4. Cook's membrane
# --------------------------------------------------------------------------

def pressure_jump_indicator(mesh, p) -> float:
    """``sqrt(sum_E h_E^3 [[dp/dn]]_E^2) / max|p|`` over interior edges of a
    linear triangle mesh: small for a smooth pressure, large for
    element-scale oscillations."""
    g = element_geometry(mesh)
    gp = np.einsum("ea,eai->ei", p[mesh.cells], g.dNdx[:, 0])
    loc = np.array([[0, 1], [1, 2], [2, 0]])
    edges = np.sort(mesh.cells[:, loc], axis=2).reshape(-1, 2)
    owner = np.repeat(np.arange(mesh.n_cells), 3)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    e, o = edges[order], owner[order]
    same = np.all(e[1:] == e[:-1], axis=1)
    a, b, ea, eb = e[:-1][same, 0], e[:-1][same, 1], o[:-1][same], o[1:][same]
    t = mesh.nodes[b] - mesh.nodes[a]
    L = np.linalg.norm(t, axis=1)
    n = np.c_[t[:, 1], -t[:, 0]] / L[:, None]
    jump = np.einsum("ei,ei->e", gp[ea] - gp[eb], n)
    return float(np.sqrt(np.sum(L ** 3 * jump ** 2)) / np.abs(p).max())


def check_cook(echo: Echo = None, levels=(8, 16, 32, 64)) -> CriterionResult:
    t0 = time.perf_counter()
    tips, ind = [], []
    for n in levels:
        sol = _cook_solver(n)
        sol.load_factor = presets.linear_ramp(1.0)
        for _ in range(4):
            sol.step(0.25)
        tips.append(sol.state.d[_nearest(sol.X0, (48.0, 60.0))].copy())
        ind.append(pressure_jump_indicator(sol.mesh, sol.state.p))
        _say(echo, f"  cook n={n}: tip A = {tips[-1]}, jump indicator = {ind[-1]:.3f}")
    tips = np.array(tips)
    diffs = np.diff(tips, axis=0)
    mono = bool(np.all(np.all(diffs > 0, axis=0) | np.all(diffs < 0, axis=0)))
    rel = np.abs(tips[-1] - tips[-2]) / np.abs(tips[-1])
    dec = bool(np.all(np.diff(ind) < 0))
    res = CriterionResult(4, "Cook's membrane convergence", bool(mono and np.all(rel < 0.02) and dec))
    for n, d, i in zip(levels, tips, ind):
        res.details.append(f"n={n:3d}: tip A = ({d[0]:+.6f}, {d[1]:+.6f}), pressure jump indicator {i:.4f}")
    res.details.append(f"monotone in both components: {mono}; finest pair difference "
                       f"{100 * rel[0]:.2f}% / {100 * rel[1]:.2f}% (< 2%); indicator decreasing: {dec}")
    res.data.update(tips=tips, indicator=ind)
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 5. manufactured fluid solution
# --------------------------------------------------------------------------

def manufactured_flow(rho: float = 1.0, mu: float = 0.05):
    """Exact velocity, pressure and the body force (per unit mass) that makes
    them a steady solution; derivatives by automatic differentiation."""
    import jax
    import jax.numpy as jnp

    def u(x):
        X, Y = x[0], x[1]
        return jnp.array([jnp.sin(jnp.pi * X) ** 2 * jnp.sin(2 * jnp.pi * Y),
                          -jnp.sin(2 * jnp.pi * X) * jnp.sin(jnp.pi * Y) ** 2])

    def p(x):
        return jnp.cos(jnp.pi * x[0]) * jnp.sin(jnp.pi * x[1])

    def sigma(x):
        G = jax.jacfwd(u)(x)
        return -p(x) * jnp.eye(2) + mu * (G + G.T)

    def f(x):
        G = jax.jacfwd(u)(x)
        div = jnp.trace(jax.jacfwd(sigma)(x), axis1=1, axis2=2)
        return (rho * G @ u(x) - div) / rho

    wrap = lambda fn: (lambda x, _f=jax.jit(jax.vmap(fn)): np.asarray(_f(np.asarray(x, float))))
    return wrap(u), wrap(p), wrap(f)


def check_mms(echo: Echo = None, levels=(8, 16, 32, 64)) -> CriterionResult:
    from .fluid import FluidMaterial, FluidSolver, PicardConfig

    t0 = time.perf_counter()
    rho, mu = 1.0, 0.05
    u_ex, p_ex, f = manufactured_flow(rho, mu)
    eu, ep = [], []
    for n in levels:
        m = meshgen.unit_square(n)
        fl = FluidSolver(m, FluidMaterial(rho, mu), PicardConfig(1e-10, 50), body_force=f)
        fl.fix("boundary", value=lambda t, x: u_ex(x))
        fl.set_pressure_pin(0)
        rep = fl.solve(None)
        if not rep.converged:
            raise StepFailure(f"manufactured solution n={n}: {rep.message}", rep)
        ml = lumped_mass(m)
        # pressure compared up to its mean (exact mean is zero)
        ph = fl.state.p - np.sum(ml * fl.state.p) / ml.sum()
        eu.append(l2_error(fl.state.u, u_ex, m))
        ep.append(l2_error(ph, lambda x: p_ex(x)[:, None], m))
        _say(echo, f"  mms n={n}: |e_u| = {eu[-1]:.3e}, |e_p| = {ep[-1]:.3e}")
    ou = np.log2(np.array(eu[:-1]) / eu[1:])
    op = np.log2(np.array(ep[:-1]) / ep[1:])
    res = CriterionResult(5, "manufactured flow convergence", bool(np.all(ou >= 1.9) and np.all(op >= 1.4)))
    for n, a, b in zip(levels, eu, ep):
        res.details.append(f"n={n:3d}: L2 velocity error {a:.4e}, pressure error {b:.4e}")
    res.details.append("orders velocity " + ", ".join(f"{v:.2f}" for v in ou) + " (>= 1.9); pressure "
                       + ", ".join(f"{v:.2f}" for v in op) + " (>= 1.4)")
    res.data.update(order_u=ou, order_p=op)
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 6. dynamic cantilever
# --------------------------------------------------------------------------

def cantilever_series(nx: int, ny: int, dt: float = 1e-3, t_end: float = 1.0, subscales: str = "dynamic"):
    cfg = presets.DEFAULTS["cantilever"]["solid"]
    m = meshgen.cantilever(nx, ny, "quad4")
    s = SolidSolver(m, SolidMaterial(cfg["rho"], cfg["mu"], cfg["inv_lambda"], cfg["gravity"]),
                    subscales=subscales)
    s.fix("clamp")
    tip = _nearest(s.X0, (10.0, 0.5))
    t, y = [0.0], [0.0]
    for _ in range(int(round(t_end / dt))):
        s.step(dt)
        t.append(s.state.time)
        y.append(s.state.d[tip, 1])
    return np.array(t), np.array(y)


def period_amplitudes(t, y) -> Tuple[float, float, float]:
    """Peak-to-peak amplitude over the first and over the last period of a
    series that starts at rest; returns ``(first, last, period)``.

    The period is twice the mean spacing of successive extrema, the start
    counting as an extremum.
    """
    t, y = np.asarray(t, float), np.asarray(y, float)
    dy = np.diff(y)
    interior = np.nonzero(dy[1:] * dy[:-1] < 0)[0] + 1
    ext = np.r_[0, interior]
    if len(ext) < 2:
        return float(np.ptp(y)), float("nan"), float("nan")
    T = 2.0 * float(np.mean(np.diff(t[ext])))
    first = float(np.ptp(y[t <= t[0] + T]))
    last = float(np.ptp(y[t >= t[-1] - T]))
    return first, last, T


def check_cantilever(echo: Echo = None) -> CriterionResult:
    t0 = time.perf_counter()
    t, yc = cantilever_series(30, 3)
    _say(echo, f"  cantilever 30x3 done ({time.perf_counter() - t0:.0f} s)")
    _, yf = cantilever_series(80, 8)
    _say(echo, f"  cantilever 80x8 done ({time.perf_counter() - t0:.0f} s)")
    err = float(np.sqrt(np.trapezoid((yc - yf) ** 2, t) / np.trapezoid(yf ** 2, t)))
    first, last, period = period_amplitudes(t, yf)
    ratio = last / first if np.isfinite(last) else 0.0
    res = CriterionResult(6, "dynamic cantilever self-convergence", bool(err < 0.10 and ratio >= 0.8))
    res.details.append(f"relative L2(time) tip error 30x3 vs 80x8: {100 * err:.2f}% (< 10%)")
    res.details.append(f"reference period {period:.3f}; amplitude first {first:.5f}, last {last:.5f}, "
                       f"ratio {ratio:.3f} (>= 0.8)")
    res.data.update(t=t, coarse=yc, fine=yf, error=err, ratio=ratio)
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 7. ALE under prescribed mesh motion
# --------------------------------------------------------------------------

def ale_deviation(dt: float, exact, t_end: float = 1.0, amplitude: float = 0.08, n: int = 8) -> float:
    """Largest L2 deviation from the steady ``exact`` flow while the interior
    nodes of a unit square oscillate."""
    from .ale import mesh_velocity
    from .fluid import FluidMaterial, FluidSolver, PicardConfig

    m = meshgen.unit_square(n)
    X0 = m.nodes.copy()
    fl = FluidSolver(m, FluidMaterial(1.0, 0.01), PicardConfig(1e-12, 50))
    fl.fix("boundary", value=lambda t, x: exact(x))
    fl.set_pressure_pin(0)
    fl.dofs.set_field(fl.state.x, "v", exact(X0))
    fl.state.u_hist[:] = exact(X0)
    bump = (np.sin(np.pi * X0[:, 0]) * np.sin(np.pi * X0[:, 1]))[:, None]
    dev = 0.0
    for k in range(int(round(t_end / dt))):
        xn = m.nodes.copy()
        m.nodes = X0 + amplitude * np.sin(2.0 * np.pi * (k + 1) * dt) * bump
        fl.state.u_dom = mesh_velocity(m.nodes, xn, dt)
        fl.step(dt)
        dev = max(dev, l2_error(fl.state.u, exact, m))
    return dev


def shear_flow(x):
    return np.c_[x[:, 1], np.zeros(len(x))]


def check_ale(echo: Echo = None, dts=(0.05, 0.025, 0.0125)) -> CriterionResult:
    t0 = time.perf_counter()
    devs = [ale_deviation(dt, shear_flow) for dt in dts]
    dec = bool(np.all(np.diff(devs) < 0))
    res = CriterionResult(7, "ALE deviation under mesh motion", dec)
    res.details.append("max L2 deviation at dt " + ", ".join(f"{d:g}: {v:.3e}" for d, v in zip(dts, devs))
                       + f"; monotone decrease: {dec}")
    res.data["deviation"] = devs
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 8, 9. FSI beam
# --------------------------------------------------------------------------

@dataclass
class BeamRun:
    dt: float
    relaxation: str
    subscales: str
    steps: int
    completed: bool
    time: np.ndarray
    tip: np.ndarray
    iterations: np.ndarray
    seconds: float
    message: str = ""

    def window_mean_drift(self, width: float = 5.0):
        sel = self.time >= self.time[-1] - width - 1e-9
        x = self.tip[sel, 0]
        mean = float(np.mean(x))
        return mean, float(np.ptp(x) / abs(mean))


_BEAM_CACHE: Dict[tuple, BeamRun] = {}


def beam_run(dt: float, relaxation: str = "aitken", subscales: str = "dynamic", steps: Optional[int] = None,
             echo: Echo = None, omega: float = 0.5) -> BeamRun:
    """FSI beam preset at ``dt`` (to t = 40 unless ``steps`` is given);
    results are cached per process."""
    key = (dt, relaxation, subscales, steps, omega)
    if key in _BEAM_CACHE:
        return _BEAM_CACHE[key]
    text = (f"[problem]\npreset = fsi_beam2d\n[time]\ndt = {dt!r}\n[solid]\nsubscales = {subscales}\n"
            f"[solver]\nrelaxation = {relaxation}\nomega_init = {omega!r}\n")
    cfg = parse_config(text, "<beam>")
    sim = build_simulation(cfg, workers=1)
    n = cfg.n_steps if steps is None else steps
    tip = _nearest(sim.solid.X0, cfg.probes[0].point)
    t0 = time.perf_counter()
    ts, tips, its = [], [], []
    completed, msg = True, ""
    report_every = max(1, int(round(5.0 / dt)))
    for k in range(n):
        try:
            rep = sim.step(dt)
        except (TrifieldError, FloatingPointError) as exc:
            completed, msg = False, f"step {k + 1} failed: {exc}"
            break
        ts.append(sim.time)
        tips.append(sim.solid.state.d[tip].copy())
        its.append(rep.iterations)
        if (k + 1) % report_every == 0:
            _say(echo, f"  beam dt={dt} {relaxation}/{subscales}: t={sim.time:.2f} tip={tips[-1]} "
                       f"mean its={np.mean(its):.2f} ({time.perf_counter() - t0:.0f} s)")
    run = BeamRun(dt, relaxation, subscales, len(ts), completed, np.array(ts), np.array(tips).reshape(-1, 2),
                  np.array(its), time.perf_counter() - t0, msg)
    _BEAM_CACHE[key] = run
    return run


COMPARE_STEPS = 100


def check_fsi_beam(echo: Echo = None, dts=(0.01, 0.02, 0.03)) -> CriterionResult:
    t0 = time.perf_counter()
    res = CriterionResult(8, "FSI beam", True)
    means = []
    for dt in dts:
        r = beam_run(dt, echo=echo)
        if not r.completed or r.time[-1] < 40.0 - 1e-9:
            res.passed = False
            res.details.append(f"dt={dt}: did not reach t=40 ({r.message})")
            continue
        mean, drift = r.window_mean_drift()
        means.append(mean)
        ok = drift < 0.01
        res.passed &= ok
        res.details.append(f"dt={dt}: reached t={r.time[-1]:.2f} in {r.seconds:.0f} s, mean coupling iterations "
                           f"{r.iterations.mean():.2f}; tip x over last 5: mean {mean:.5f}, drift "
                           f"{100 * drift:.3f}% (< 1%)")
    if len(means) == len(dts):
        spread = (max(means) - min(means)) / abs(np.mean(means))
        res.passed &= bool(spread < 0.05)
        res.details.append(f"late-time spread across dt: {100 * spread:.2f}% (< 5%)")
    a = beam_run(0.02, echo=echo)
    f = beam_run(0.02, relaxation="fixed", steps=COMPARE_STEPS, echo=echo)
    ia = a.iterations[:COMPARE_STEPS].mean()
    ifx = f.iterations.mean() if f.completed else np.inf
    res.passed &= bool(ia < ifx)
    res.details.append(f"dt=0.02 first {COMPARE_STEPS} steps: Aitken {ia:.2f} vs fixed omega=0.5 {ifx:.2f} "
                       "mean coupling iterations")
    # wall time of the runs themselves, so cached runs still count
    total = sum(beam_run(dt).seconds for dt in dts) + f.seconds
    res.passed &= bool(total < 1800.0)
    res.details.append(f"runtime of the beam runs {total / 60:.1f} min (< 30 min)")
    return _finish(res, t0)


def check_subscales(echo: Echo = None, dt: float = 0.02) -> CriterionResult:
    t0 = time.perf_counter()
    d = beam_run(dt, echo=echo)
    q = beam_run(dt, subscales="quasi-static", echo=echo)
    di, qi = d.iterations.mean(), (q.iterations.mean() if q.steps else np.nan)
    dyn_ok = d.completed
    qs_bad = (not q.completed) or bool(qi > 2.0 * di)
    res = CriterionResult(9, "dynamic sub-scale necessity", bool(dyn_ok and qs_bad))
    res.details.append(f"dynamic sub-scales: {'completed' if d.completed else d.message}, {d.steps} steps, "
                       f"mean coupling iterations {di:.2f}, max {d.iterations.max() if d.steps else 0}")
    res.details.append(f"quasi-static sub-scales: {'completed' if q.completed else q.message}, {q.steps} steps, "
                       f"mean coupling iterations {qi:.2f}, max {q.iterations.max() if q.steps else 0}")
    res.details.append(f"ratio quasi-static/dynamic {qi / di:.2f} (pass needs a failed step or > 2)")
    if q.steps and d.steps:
        res.details.append(f"final tip x: dynamic {d.tip[-1, 0]:.5f}, quasi-static {q.tip[-1, 0]:.5f}")
    return _finish(res, t0)


# --------------------------------------------------------------------------
# 10. 3D plate (extended)
# --------------------------------------------------------------------------

def check_plate3d(echo: Echo = None, steps: int = 50) -> CriterionResult:
    t0 = time.perf_counter()
    cfg = parse_config("[problem]\npreset = plate3d\n", "<plate>")
    sim = build_simulation(cfg, workers=1)
    res = CriterionResult(10, "3D plate", True)
    jmin = np.inf
    for k in range(steps):
        try:
            sim.step(cfg.dt)
        except TrifieldError as exc:
            res.passed = False
            res.details.append(f"step {k + 1} failed: {exc}")
            break
        jmin = min(jmin, min_jacobian(sim.fluid.mesh), float(np.min(sim.solid.kin.J)))
        _say(echo, f"  plate step {k + 1}: t={sim.time:.3f}, min detJ {jmin:.3e}")
    res.passed &= bool(jmin > 0)
    res.details.append(f"{sim.steps} steps, smallest Jacobian {jmin:.3e} (> 0)")
    return _finish(res, t0)


# --------------------------------------------------------------------------
# suites
# --------------------------------------------------------------------------

CHECKS: Dict[int, Callable[..., CriterionResult]] = {
    1: check_kernels, 2: check_tangent, 3: check_newton, 4: check_cook, 5: check_mms, 6: check_cantilever,
    7: check_ale, 8: check_fsi_beam, 9: check_subscales, 10: check_plate3d,
}
SUITES: Dict[str, Tuple[int, ...]] = {
    "kernels": (1,), "tangent": (2,), "newton": (3,), "cook": (4,), "mms": (5,), "cantilever": (6,),
    "ale": (7,), "fsi_beam": (8,), "subscales": (9,), "plate3d": (10,),
    "fsi": (8, 9), "fast": (1, 2, 3, 5, 7), "primary": tuple(range(1, 10)), "all": tuple(range(1, 11)),
}
SUITES.update({str(k): (k,) for k in CHECKS})


def run_suite(name: str, echo: Echo = None) -> List[CriterionResult]:
    out = []
    for k in SUITES[name]:
        _say(echo, f"criterion {k}: running {CHECKS[k].__name__}")
        try:
            r = CHECKS[k](echo=echo)
        except Exception as exc:  # report, do not abort the suite
            r = CriterionResult(k, CHECKS[k].__name__, False, [f"raised {type(exc).__name__}: {exc}"])
        _say(echo, r.line())
        out.append(r)
    return out


def format_report(results: List[CriterionResult]) -> str:
    lines = []
    for r in results:
        lines.append(r.line())
        lines += [f"    {d}" for d in r.details]
    n = sum(r.passed for r in results)
    lines.append(f"{n}/{len(results)} criteria passed")
    return "\n".join(lines)


__all__ = ["CriterionResult", "CHECKS", "SUITES", "run_suite", "format_report", "beam_run", "fit_order",
           "pressure_jump_indicator", "manufactured_flow", "ale_deviation", "cantilever_series", "period_amplitudes"]

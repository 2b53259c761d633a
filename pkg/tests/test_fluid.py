import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trifield import meshgen
from trifield.errors import ConfigError
from trifield.fem import l2_error
from trifield.fluid import (FluidMaterial, FluidSolver, PicardConfig, _fluid_kernel, bdf2_rate,
                            fluid_element_matrices, tau_fluid)
from trifield.mesh import tag_boundary
from trifield.verify import ale_deviation, manufactured_flow


def test_tau_fluid_example():
    t = tau_fluid(1.0, FluidMaterial(1.0, 1.0), 0.0)
    assert tuple(map(float, t)) == pytest.approx((0.25, 0.2, 0.2))


def test_tau_fluid_convective_limit():
    t1 = tau_fluid(1.0, FluidMaterial(1.0, 1e-12), 2.0)[0]
    assert float(t1) == pytest.approx(0.5, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_tau_fluid_decreases_with_speed(h, a, b):
    mat = FluidMaterial(1.3, 0.1)
    lo, hi = sorted((a, b))
    assert tau_fluid(h, mat, hi)[0] <= tau_fluid(h, mat, lo)[0]


def test_material_validation():
    with pytest.raises(ConfigError):
        FluidMaterial(0.0, 1.0)
    with pytest.raises(ConfigError):
        FluidMaterial(1.0, -1.0)


def test_bdf2_rate_exact_on_quadratic():
    u = lambda t: 2.0 * t ** 2 - t + 4.0
    dt = 0.25
    assert bdf2_rate(u(1.0), u(0.75), u(0.5), dt) == pytest.approx(4.0 * 1.0 - 1.0, rel=1e-12)


def _random_state(fl, rng):
    x = rng.standard_normal(fl.dofs.n_dof)
    c = rng.standard_normal((fl.mesh.n_nodes, fl.nd))
    fl.state.u_hist = rng.standard_normal(fl.state.u_hist.shape)
    fl.state.step = 1
    fl.store.hist[0] = rng.standard_normal(fl.store.hist[0].shape)
    return x, c


@pytest.mark.parametrize("dt", [None, 0.1])
def test_explicit_matrices_match_automatic_differentiation(rng, dt):
    fl = FluidSolver(meshgen.unit_square(3), FluidMaterial(1.5, 0.3, (0.2, -1.0)))
    x, c = _random_state(fl, rng)
    args, transient = fl._inputs(x, c, dt)
    Ke, Fe = fluid_element_matrices(*args[1:], nd=2, transient=transient)
    Kad, (Rad, _) = _fluid_kernel(2, transient, True)(*(jnp.asarray(a) for a in args))
    Kad, Rad = np.asarray(Kad), np.asarray(Rad)
    assert np.max(np.abs(Ke - Kad)) <= 1e-10 * np.max(np.abs(Kad))
    Re = np.einsum("eij,ej->ei", Ke, args[0]) + Fe
    assert np.max(np.abs(Re - Rad)) <= 1e-10 * np.max(np.abs(Rad))


def test_explicit_matrices_match_in_3d(rng):
    m = meshgen.box_tets(np.linspace(0, 1, 3), np.linspace(0, 1, 3), np.linspace(0, 1, 3))
    fl = FluidSolver(m, FluidMaterial(1.0, 0.1))
    x, c = _random_state(fl, rng)
    args, transient = fl._inputs(x, c, 0.05)
    Ke, _ = fluid_element_matrices(*args[1:], nd=3, transient=transient)
    Kad, _ = _fluid_kernel(3, transient, True)(*(jnp.asarray(a) for a in args))
    assert np.max(np.abs(Ke - np.asarray(Kad))) <= 1e-10 * np.max(np.abs(Kad))


def test_mesh_velocity_equal_to_fluid_velocity_removes_convection(rng):
    m = meshgen.unit_square(4)
    a = FluidSolver(m, FluidMaterial(1.0, 0.1))
    b = FluidSolver(m, FluidMaterial(1.0, 0.1), convection=False)
    x = rng.standard_normal(a.dofs.n_dof)
    a.state.x = x.copy()
    b.state.x = x.copy()
    a.state.u_dom = a.state.u
    Ka = a.system(0.1).matrix.toarray()
    Kb = b.system(0.1).matrix.toarray()
    assert np.allclose(Ka, Kb, rtol=0, atol=1e-12 * np.abs(Kb).max())


def test_rest_state_stays_at_rest():
    fl = FluidSolver(meshgen.unit_square(4), FluidMaterial(1.0, 0.1))
    fl.fix("boundary")
    fl.set_pressure_pin(0)
    for _ in range(3):
        fl.step(0.1)
    assert np.max(np.abs(fl.state.x)) < 1e-14


def test_hydrostatic_pressure():
    # gravity is balanced by a linear pressure; pressure is positive in compression
    m = meshgen.unit_square(6)
    fl = FluidSolver(m, FluidMaterial(2.0, 0.1, (0.0, -9.0)))
    fl.fix("boundary")
    bottom_left = int(np.argmin(np.linalg.norm(m.nodes, axis=1)))
    fl.set_pressure_pin(bottom_left)
    fl.solve(None)
    assert np.max(np.abs(fl.state.u)) < 1e-10
    assert np.allclose(fl.state.p, -2.0 * 9.0 * m.nodes[:, 1], atol=1e-9)


def test_boundary_force_of_uniform_pressure():
    m = meshgen.unit_square(4)
    tag_boundary(m, {"left": lambda c: c[0] < 1e-9}, default="rest")
    fl = FluidSolver(m, FluidMaterial(1.0, 0.1))
    fl.dofs.set_field(fl.state.x, "p", np.full(m.n_nodes, 3.0))
    assert np.allclose(fl.boundary_force("left"), [-3.0, 0.0], atol=1e-13)


def test_uniform_stream_is_exact_under_mesh_motion():
    assert ale_deviation(0.05, lambda x: np.c_[np.full(len(x), 0.7), np.full(len(x), -0.2)]) < 1e-12


def test_shear_flow_deviation_is_small():
    assert ale_deviation(0.05, lambda x: np.c_[x[:, 1], np.zeros(len(x))]) < 1e-2


@pytest.mark.slow
def test_manufactured_flow_converges():
    u_ex, p_ex, f = manufactured_flow(1.0, 0.05)
    err = []
    for n in (8, 16):
        m = meshgen.unit_square(n)
        fl = FluidSolver(m, FluidMaterial(1.0, 0.05), PicardConfig(1e-10, 50), body_force=f)
        fl.fix("boundary", value=lambda t, x: u_ex(x))
        fl.set_pressure_pin(0)
        assert fl.solve(None).converged
        err.append(l2_error(fl.state.u, u_ex, m))
    assert np.log2(err[0] / err[1]) > 1.8


def test_picard_converges_on_cavity():
    m = meshgen.unit_square(6)
    fl = FluidSolver(m, FluidMaterial(1.0, 0.01), PicardConfig(1e-8, 40))
    fl.fix("boundary")
    fl.fix(np.nonzero(m.nodes[:, 1] > 1 - 1e-9)[0], value=(1.0, 0.0))
    fl.set_pressure_pin(0)
    rep = fl.step(0.1)
    assert rep.converged and rep.changes[-1] < 1e-8
    assert fl.state.step == 1 and fl.state.time == pytest.approx(0.1)

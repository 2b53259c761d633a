import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trifield import meshgen, sgs
from trifield.fluid import FluidMaterial, FluidSolver
from trifield.solid import SolidMaterial, SolidSolver

pos = st.floats(1e-3, 1e3)


def test_tau_t_example():
    assert sgs.tau_t(1.0, 1.0, 2.0, 1.0) == pytest.approx(1 / 3)


def test_tau_t_limits():
    assert sgs.tau_t(0.7, 2.0, 2.0, np.inf) == pytest.approx(0.7)
    assert sgs.tau_t(np.inf, 2.0, 2.0, 0.1) == pytest.approx(0.1 ** 2 / 4.0)
    assert sgs.tau_t(1.0, 1.0, 2.0, 1e-8) < 1e-15


@settings(max_examples=100, deadline=None)
@given(pos, pos, st.sampled_from([1.0, 2.0]), pos)
def test_tau_t_below_both_time_scales(tau_K, rho, gamma, dt):
    tt = sgs.tau_t(tau_K, rho, gamma, dt)
    assert 0 < tt <= min(tau_K, dt ** 2 / (rho * gamma)) * (1 + 1e-12)


def test_theta_history():
    assert sgs.theta_history(1.0, 2.0, 3.0) == 5.0 - 8.0 + 3.0
    assert sgs.theta_history(1.0, 2.0, 3.0, first_step=True) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), pos, pos, pos, st.floats(-1, 1), st.sampled_from([1.0, 2.0]))
def test_solid_subscale_satisfies_its_ode(R1, tau1, rho, dt, theta, gamma):
    d, rho_a, tt = sgs.solid_subscales(R1, tau1, rho, dt, theta, gamma)
    # rho * discrete acceleration of the sub-scale plus its damping term
    lhs = rho * (gamma * d - theta) / dt ** 2 + d / tau1
    assert lhs == pytest.approx(R1, rel=1e-9, abs=1e-9 * (abs(R1) + rho * abs(theta) / dt ** 2))
    assert rho_a == pytest.approx(rho * (gamma * d - theta) / dt ** 2, rel=1e-9,
                                  abs=1e-9 * (abs(R1) + rho * abs(theta) / dt ** 2))
    assert sgs.subscale_acceleration_term(R1, tau1, tt, rho, dt, theta) == pytest.approx(rho_a)


def test_solid_subscale_example():
    d, rho_a, tt = sgs.solid_subscales(3.0, 1.0, 1.0, 1.0, 0.0, 2.0)
    assert (d, rho_a, tt) == pytest.approx((1.0, 2.0, 1 / 3))


def test_quasi_static_limit():
    d, rho_a, _ = sgs.solid_subscales(2.0, 0.5, 1.0, 1e8, 0.0)
    assert d == pytest.approx(1.0) and abs(rho_a) < 1e-12


def test_fluid_velocity_subscale_example():
    u, rdt = sgs.fluid_velocity_subscale(2.0, 1.0, 1.0, 1.0, 1.0)
    assert (u, rdt) == pytest.approx((1.5, 0.5))


def test_fluid_velocity_subscale_steady():
    u, rdt = sgs.fluid_velocity_subscale(np.array([2.0]), 0.25, 1.0, None, np.array([9.0]))
    assert u[0] == 0.5 and rdt[0] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), pos, pos, pos, st.floats(-5, 5))
def test_fluid_subscale_satisfies_backward_euler(R1, tau1, rho, dt, u_prev):
    u, rdt = sgs.fluid_velocity_subscale(R1, tau1, rho, dt, u_prev)
    assert rdt + u / tau1 == pytest.approx(R1, rel=1e-9, abs=1e-9 * (abs(R1) + rho * abs(u_prev) / dt))


def test_store_rotation():
    st_ = sgs.SubscaleStore(2, 3, 2, levels=3)
    for k in (1.0, 2.0, 3.0, 4.0):
        st_.set_current(np.full((2, 3, 2), k))
        st_.rotate()
    assert [float(h[0, 0, 0]) for h in st_.hist] == [4.0, 3.0, 2.0]


def test_store_copy_is_independent():
    a = sgs.SubscaleStore(1, 1, 2, levels=1)
    b = a.copy()
    b.hist[0] += 1.0
    assert a.hist[0].sum() == 0.0


def test_update_solid_subscales():
    store = sgs.SubscaleStore(1, 1, 2, levels=3)
    R1 = np.array([[[3.0, 0.0]]])
    sgs.update_solid_subscales(store, R1, np.zeros((1, 1, 3)), np.ones((1, 1)), [1.0], 0.5, 0.25, 1.0, 1.0)
    assert store.v[0, 0] == pytest.approx([1.0, 0.0])
    assert store.p[0, 0] == 0.25


def test_update_fluid_subscales():
    store = sgs.SubscaleStore(1, 1, 2, levels=1)
    sgs.update_fluid_subscales(store, np.array([[[2.0, 0.0]]]), np.ones((1, 1, 3)), np.full((1, 1), 2.0),
                               [1.0], 0.5, 0.1, 1.0, 1.0)
    assert store.v[0, 0] == pytest.approx([1.0, 0.0])
    assert np.allclose(store.s, -0.5) and store.p[0, 0] == pytest.approx(-0.2)


def test_solid_history_rotates_only_on_commit():
    s = SolidSolver(meshgen.cantilever(4, 1), SolidMaterial(1.0, 50.0, 0.01, (0.0, -1.0)))
    s.fix("clamp")
    s.step(0.05)
    h = s.store.hist.copy()
    assert np.any(h[0] != 0)
    s.solve(0.05, s.predictor())
    s.solve(0.05, s.predictor())
    assert np.array_equal(s.store.hist, h)
    s.commit(0.05)
    assert np.array_equal(s.store.hist[1], h[0])


def test_fluid_history_rotates_only_on_commit():
    m = meshgen.unit_square(3)
    fl = FluidSolver(m, FluidMaterial(1.0, 0.1, (1.0, 0.0)))
    fl.fix("boundary")
    fl.set_pressure_pin(0)
    fl.step(0.1)
    h = fl.store.hist.copy()
    assert np.any(h != 0)
    fl.picard_pass(0.1)
    fl.picard_pass(0.1)
    assert np.array_equal(fl.store.hist, h)

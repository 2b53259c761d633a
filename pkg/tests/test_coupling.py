import numpy as np
import pytest

from trifield import meshgen
from trifield.config import parse_config
from trifield.coupling import (AitkenState, InterfaceMap, aitken_update, interface_velocity, relax,
                               transfer_traction)
from trifield.errors import InterfaceError
from trifield.mesh import lumped_normals
from trifield.runner import build_simulation


def test_aitken_example():
    assert aitken_update(0.5, [1.0], [0.5]) == pytest.approx(1.0)


def test_aitken_clamps():
    assert aitken_update(0.5, [1.0], [0.5], 0.05, 0.8) == 0.8
    assert aitken_update(0.5, [1.0], [3.0], 0.05, 1.0) == 0.05


def test_aitken_zero_denominator_keeps_omega():
    assert aitken_update(0.37, [1.0, 2.0], [1.0, 2.0]) == 0.37


def test_aitken_solves_scalar_linear_fixed_point_in_two_steps():
    G = lambda d: 0.3 * d + 1.0
    d, w = 0.0, 0.5
    r0 = G(d) - d
    d = d + w * r0
    r1 = G(d) - d
    w = aitken_update(w, [r0], [r1])
    d = d + w * r1
    assert d == pytest.approx(1.0 / 0.7, rel=1e-14)


def test_aitken_state_reset():
    a = AitkenState(omega=0.9, omega_init=0.5)
    a.r_prev = np.ones(3)
    a.reset()
    assert a.omega == 0.5 and a.r_prev is None
    assert a.clamp(2.0) == 1.0 and a.clamp(0.0) == 0.05


def test_relax_example():
    assert relax(0.0, 2.0, 0.5) == 1.0


def test_interface_velocity_stencils():
    dt = 0.1
    hist = np.array([[0.2], [0.1]])
    assert interface_velocity(np.array([0.3]), hist, dt, True)[0] == pytest.approx(1.0)
    # BDF2 is exact for a linear history
    assert interface_velocity(np.array([0.3]), hist, dt, False)[0] == pytest.approx(1.0)


def test_closed_boundary_normals_sum_to_zero():
    m = meshgen.unit_square(6)
    _, n, w = lumped_normals(m, "boundary")
    assert np.allclose((w[:, None] * n).sum(axis=0), 0.0, atol=1e-14)
    assert w.sum() == pytest.approx(4.0)


@pytest.fixture(scope="module")
def beam_at_rest():
    cfg = parse_config("[problem]\npreset = fsi_beam2d\n[fluid]\ninlet_velocity = 0\n", "<test>")
    return build_simulation(cfg, workers=1)


def test_interface_normals_are_opposite(beam_at_rest):
    imap = beam_at_rest.problem.imap
    assert len(imap) > 0
    assert np.allclose(imap.solid_normals, -imap.fluid_normals, atol=1e-12)
    sim = beam_at_rest
    assert np.allclose(sim.solid.mesh.nodes[imap.solid_nodes], sim.fluid.mesh.nodes[imap.fluid_nodes])


def test_traction_of_uniform_pressure(beam_at_rest):
    sim = beam_at_rest
    imap = sim.problem.imap
    fl = sim.fluid
    saved = fl.state.x.copy()
    fl.dofs.set_field(fl.state.x, "p", np.full(fl.mesh.n_nodes, 2.0))
    try:
        t = transfer_traction(fl, imap, sim.solid.mesh.n_nodes)
    finally:
        fl.state.x = saved
    assert np.allclose(t[imap.solid_nodes], -2.0 * imap.solid_normals)
    others = np.setdiff1d(np.arange(sim.solid.mesh.n_nodes), imap.solid_nodes)
    assert np.array_equal(t[others], np.zeros((len(others), 2)))


def test_mismatched_interface_is_rejected():
    solid = meshgen.unit_square(4)
    fluid = meshgen.unit_square(5)
    with pytest.raises(InterfaceError):
        InterfaceMap(solid, fluid, "boundary", "boundary")


def test_rest_state_converges_in_one_iteration(beam_at_rest):
    sim = beam_at_rest
    for _ in range(2):
        rep = sim.step(0.02)
        assert rep.converged and rep.iterations == 1
    assert np.max(np.abs(sim.solid.state.x)) == 0.0
    assert np.max(np.abs(sim.fluid.state.x)) == 0.0


@pytest.mark.slow
def test_coupled_steps_are_deterministic():
    text = "[problem]\npreset = fsi_beam2d\n[fluid]\nramp_time = 0.1\n"
    runs = []
    for _ in range(2):
        sim = build_simulation(parse_config(text, "<test>"), workers=1)
        its = [sim.step(0.02).iterations for _ in range(3)]
        runs.append((sim.solid.state.x.copy(), sim.fluid.state.x.copy(), its))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert np.array_equal(runs[0][1], runs[1][1])
    assert runs[0][2] == runs[1][2]
    assert np.max(np.abs(runs[0][0])) > 0

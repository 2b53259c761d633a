import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from trifield import meshgen
from trifield.errors import AssemblyError, SolverError
from trifield.fem import (Assembler, DirichletMasker, DofMap, LinearSolverConfig, ReusableFactorization, SparseSystem,
                          apply_dirichlet, assemble, l2_error, l2_norm, lumped_mass, solve_linear, three_field_layout)


def test_single_element_identity_block():
    edofs = np.array([[0, 1, 2]])
    sys_ = assemble(edofs, np.eye(3)[None], n_dof=3)
    assert np.array_equal(sys_.matrix.toarray(), np.eye(3))


def test_shared_element_doubles_entries():
    edofs = np.array([[0, 1, 2], [0, 1, 2]])
    Ke = np.stack([np.arange(9.0).reshape(3, 3)] * 2)
    A = assemble(edofs, Ke, n_dof=3).matrix.toarray()
    assert np.array_equal(A, 2 * np.arange(9.0).reshape(3, 3))


def test_assembly_overlap_and_vector():
    edofs = np.array([[0, 1], [1, 2]])
    Ke = np.array([[[1.0, -1.0], [-1.0, 1.0]]] * 2)
    Re = np.ones((2, 2))
    s = assemble(edofs, Ke, Re, n_dof=3)
    assert np.array_equal(s.matrix.toarray(), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    assert np.array_equal(s.rhs, [1, 2, 1])


def test_assembler_rejects_bad_indices():
    with pytest.raises(AssemblyError):
        Assembler(np.array([[0, 5]]), 3)
    asm = Assembler(np.array([[0, 1]]), 2)
    with pytest.raises(AssemblyError):
        asm.values(np.ones((1, 3, 3)))


def test_parallel_assembly_matches_serial(rng):
    mesh = meshgen.unit_square(12)
    dm = DofMap(mesh.n_nodes, three_field_layout(2))
    edofs = dm.element_dofs(mesh.cells)
    asm = Assembler(edofs, dm.n_dof)
    Ke = rng.standard_normal((len(edofs), edofs.shape[1], edofs.shape[1]))
    a = asm.values(Ke)
    b = asm.values_parallel(Ke, workers=4)
    assert np.max(np.abs(a - b)) < 1e-10 * np.max(np.abs(a))


def test_apply_dirichlet_identity_rows():
    A = sp.csr_matrix(np.array([[4.0, -1, 0], [-1, 4, -1], [0, -1, 4]]))
    s = apply_dirichlet(SparseSystem(A, np.array([1.0, 2.0, 3.0])), [0], [5.0])
    M = s.matrix.toarray()
    assert np.array_equal(M[0], [1, 0, 0])
    assert np.array_equal(M[:, 0], [1, 0, 0])
    assert s.rhs[0] == 5.0
    x, _ = solve_linear(s)
    assert x[0] == pytest.approx(5.0, abs=1e-14)
    # same solution as the reduced system
    assert np.allclose(A.toarray()[1:] @ x, [2.0, 3.0])


def test_masker_matches_apply_dirichlet(rng):
    mesh = meshgen.unit_square(4)
    edofs = mesh.cells
    asm = Assembler(edofs, mesh.n_nodes)
    Ke = rng.standard_normal((len(edofs), 3, 3))
    data = asm.values(Ke)
    rhs = rng.standard_normal(mesh.n_nodes)
    dofs = np.array([0, 3, 7])
    a = apply_dirichlet(SparseSystem(asm._csr(data), rhs), dofs, [1.0, 2.0, 3.0])
    b = DirichletMasker(asm, dofs).apply(data, rhs, [1.0, 2.0, 3.0])
    assert np.allclose(a.matrix.toarray(), b.matrix.toarray(), atol=1e-14)
    assert np.allclose(a.rhs, b.rhs, atol=1e-14)


def test_solve_identity():
    b = np.arange(1.0, 6.0)
    x, rep = solve_linear(SparseSystem(sp.identity(5, format="csr"), b))
    assert np.array_equal(x, b)
    assert rep.converged


def test_solve_two_by_two():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 3.0]]))
    x, _ = solve_linear(SparseSystem(A, np.array([3.0, 5.0])))
    assert np.allclose(x, [0.8, 1.4], atol=1e-14)


def test_zero_rhs_gives_zero():
    x, rep = solve_linear(SparseSystem(sp.identity(3, format="csr"), np.zeros(3)))
    assert np.array_equal(x, 0.0 * x) and rep.converged


@pytest.mark.parametrize("method", ["direct", "gmres"])
def test_random_spd_residual(rng, method):
    B = rng.standard_normal((50, 50))
    A = B @ B.T + 50 * np.eye(50)
    b = rng.standard_normal(50)
    x, rep = solve_linear(SparseSystem(sp.csr_matrix(A), b), LinearSolverConfig(method=method))
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert rep.converged


def test_singular_matrix_raises():
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolverError):
        solve_linear(SparseSystem(A, np.array([1.0, 2.0])))


def test_incompatible_shapes_raise():
    with pytest.raises(SolverError):
        solve_linear(SparseSystem(sp.identity(3, format="csr"), np.ones(2)))


def test_reusable_factorization_reuses(rng):
    B = rng.standard_normal((40, 40))
    A = B @ B.T + 40 * np.eye(40)
    rf = ReusableFactorization()
    b = rng.standard_normal(40)
    x1, _ = rf.solve(SparseSystem(sp.csr_matrix(A), b))
    A2 = A + 1e-3 * np.diag(rng.uniform(size=40))
    x2, rep = rf.solve(SparseSystem(sp.csr_matrix(A2), b))
    assert rf.factorizations == 1
    assert np.linalg.norm(A2 @ x2 - b) <= 1e-9 * np.linalg.norm(b)
    rf.reset()
    rf.solve(SparseSystem(sp.csr_matrix(A2), b))
    assert rf.factorizations == 2


def test_l2_norm_of_one_is_sqrt_area(square8):
    assert l2_norm(np.ones(square8.n_nodes), square8) == pytest.approx(1.0, abs=1e-14)


def test_l2_norm_constant_vector(square8):
    f = np.full((square8.n_nodes, 3), 2.0)
    assert l2_norm(f, square8) == pytest.approx(2.0 * np.sqrt(3.0), abs=1e-13)


def test_l2_norm_linear_field(square8):
    # int_0^1 x^2 dx = 1/3
    assert l2_norm(square8.nodes[:, 0], square8) == pytest.approx(np.sqrt(1 / 3), abs=1e-13)


def test_l2_error_of_interpolated_linear_is_zero(square8):
    f = 2 * square8.nodes[:, 0] - square8.nodes[:, 1]
    assert l2_error(f, lambda x: 2 * x[:, 0] - x[:, 1], square8) < 1e-14


def test_lumped_mass_sums_to_area():
    mesh = meshgen.cook_membrane(4)
    assert lumped_mass(mesh).sum() == pytest.approx(48 * (44 + 16) / 2, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.dictionaries(st.sampled_from("abcd"), st.integers(1, 4), min_size=1))
def test_dofmap_is_bijection(n_nodes, fields):
    dm = DofMap(n_nodes, fields)
    all_dofs = np.concatenate([dm.dofs(name).ravel() for name in fields])
    assert np.array_equal(np.sort(all_dofs), np.arange(dm.n_dof))


def test_dofmap_field_roundtrip(rng):
    dm = DofMap(5, three_field_layout(2))
    x = np.zeros(dm.n_dof)
    d = rng.standard_normal((5, 2))
    dm.set_field(x, "v", d)
    assert np.array_equal(dm.field_view(x, "v"), d)
    assert np.array_equal(x[dm.dofs("v")], d)
    assert np.array_equal(x[dm.dofs("v", comp=1)], d[:, 1])


def test_dofmap_errors():
    dm = DofMap(3, {"u": 2})
    with pytest.raises(KeyError):
        dm.dofs("p")
    with pytest.raises(AssemblyError):
        dm.dofs("u", [3])
    with pytest.raises(AssemblyError):
        dm.constrain([100])


def test_constraint_arrays_sorted():
    dm = DofMap(4, {"u": 1})
    dm.constrain([3, 1], [0.5, 0.25])
    k, v = dm.constraint_arrays()
    assert np.array_equal(k, [1, 3]) and np.array_equal(v, [0.25, 0.5])

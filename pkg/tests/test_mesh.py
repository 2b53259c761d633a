import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trifield import meshgen
from trifield.errors import DomainError, InvertedElementError, MeshError
from trifield.mesh import (Mesh, det_inv, element_diameters, element_geometry, exterior_faces, geometry_map,
                           locate, quadrature_for, read_mesh, ref_element, shape_eval, tag_boundary, write_mesh)

KINDS = ["tri3", "tri6", "quad4", "tet4", "line2", "line3"]


def random_points(ref, n, rng):
    if ref.geometry == "cube":
        return rng.uniform(-1, 1, (n, ref.dim))
    return rng.dirichlet(np.ones(ref.dim + 1), n)[:, 1:]


def test_p1_triangle_barycenter():
    N, _ = shape_eval(ref_element("tri3"), [1 / 3, 1 / 3])
    assert np.allclose(N, 1 / 3, atol=1e-15)


def test_p1_triangle_vertex():
    N, _ = shape_eval(ref_element("tri3"), [0.0, 0.0])
    assert np.array_equal(N, [1.0, 0.0, 0.0])


def test_q1_center():
    N, _ = shape_eval(ref_element("quad4"), [0.0, 0.0])
    assert np.allclose(N, 0.25, atol=1e-15)


def test_point_outside_reference_element():
    with pytest.raises(DomainError):
        shape_eval(ref_element("tri3"), [0.8, 0.8])


@pytest.mark.parametrize("kind", KINDS)
def test_partition_of_unity(kind, rng):
    ref = ref_element(kind)
    N, dN = ref.eval(random_points(ref, 100, rng))
    assert np.abs(N.sum(axis=1) - 1).max() < 1e-12
    assert np.linalg.norm(dN.sum(axis=1), axis=1).max() < 1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_lagrange_property(kind):
    ref = ref_element(kind)
    N, _ = ref.eval(ref.nodes)
    assert np.allclose(N, np.eye(ref.n_nodes), atol=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_gradients_match_finite_differences(kind, rng):
    ref = ref_element(kind)
    x = random_points(ref, 5, rng) * 0.9 + 0.02
    _, dN = ref.eval(x)
    h = 1e-6
    for j in range(ref.dim):
        e = np.zeros(ref.dim)
        e[j] = h
        fd = (ref.eval(x + e)[0] - ref.eval(x - e)[0]) / (2 * h)
        assert np.allclose(fd, dN[:, :, j], atol=1e-8)


def test_triangle_degree1_rule():
    q = quadrature_for("tri3", 1)
    assert len(q) == 1
    assert np.allclose(q.points[0], [1 / 3, 1 / 3])
    assert q.weights[0] == pytest.approx(0.5)


def test_triangle_x_squared():
    q = quadrature_for("tri3", 2)
    assert np.sum(q.weights * q.points[:, 0] ** 2) == pytest.approx(1 / 12, abs=1e-15)


def test_quad_measure():
    assert quadrature_for("quad4", 1).weights.sum() == pytest.approx(4.0)


def test_unsupported_degree():
    with pytest.raises(Exception):
        quadrature_for("tri3", 0)


def _simplex_monomial(a, b, c=None):
    from math import factorial
    if c is None:
        return factorial(a) * factorial(b) / factorial(a + b + 2)
    return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)


@pytest.mark.parametrize("kind,dmax", [("tri3", 4), ("tet4", 3), ("quad4", 4)])
def test_quadrature_exactness(kind, dmax):
    for deg in range(1, dmax + 1):
        q = quadrature_for(kind, deg)
        assert np.all(q.weights > 0)
        x = q.points
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                if kind == "tri3":
                    exact = _simplex_monomial(a, b)
                    got = np.sum(q.weights * x[:, 0] ** a * x[:, 1] ** b)
                elif kind == "quad4":
                    ex1 = lambda k: 0.0 if k % 2 else 2.0 / (k + 1)
                    exact = ex1(a) * ex1(b)
                    got = np.sum(q.weights * x[:, 0] ** a * x[:, 1] ** b)
                else:
                    c = deg - a - b
                    exact = _simplex_monomial(a, b, c)
                    got = np.sum(q.weights * x[:, 0] ** a * x[:, 1] ** b * x[:, 2] ** c)
                assert got == pytest.approx(exact, rel=1e-12, abs=1e-15)


def one_triangle(scale=1.0):
    return Mesh(scale * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), [[0, 1, 2]], "tri3")


@pytest.mark.parametrize("xi", [[0.2, 0.3], [0.0, 0.0], [0.5, 0.5]])
def test_unit_right_triangle_jacobian(xi):
    _, Jg, det, Jinv = geometry_map(one_triangle(), 0, xi)
    assert det == pytest.approx(1.0)
    assert np.allclose(Jinv @ Jg, np.eye(2), atol=1e-12)


def test_scaled_triangle_jacobian():
    assert geometry_map(one_triangle(2.0), 0, [0.1, 0.1])[2] == pytest.approx(4.0)


def test_degenerate_triangle_is_inverted():
    m = Mesh(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), [[0, 1, 2]], "tri3")
    with pytest.raises(InvertedElementError):
        geometry_map(m, 0, [0.2, 0.2])
    with pytest.raises(InvertedElementError):
        element_geometry(m)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31 - 1))
def test_closed_form_det_inv(n, seed):
    A = np.random.default_rng(seed).normal(size=(7, n, n)) + 3.0 * np.eye(n)
    det, inv = det_inv(A)
    assert np.allclose(det, np.linalg.det(A), rtol=1e-12, atol=1e-12)
    assert np.allclose(inv, np.linalg.inv(A), rtol=1e-10, atol=1e-12)


def test_element_geometry_inverse_jacobian(rng):
    m = meshgen.cook_membrane(4)
    m.nodes = m.nodes + rng.uniform(-0.5, 0.5, m.nodes.shape)
    g = element_geometry(m)
    area = g.wdetJ.sum()
    # Cook's quadrilateral: 48 wide, left edge 44, right edge 16 high
    m0 = meshgen.cook_membrane(4)
    assert element_geometry(m0).wdetJ.sum() == pytest.approx(48 * (44 + 16) / 2)
    assert area > 0


def test_diameter_is_longest_vertex_distance():
    m = one_triangle(2.0)
    assert element_diameters(m)[0] == pytest.approx(2.0 * np.sqrt(2.0))


def test_p2_diameter_uses_vertices():
    m = meshgen.to_p2(one_triangle())
    assert element_diameters(m)[0] == pytest.approx(np.sqrt(2.0))


@pytest.mark.parametrize("kind", ["tri3", "quad4", "tri6"])
def test_mesh_file_round_trip(tmp_path, kind):
    m = meshgen.unit_square(3, "tri3" if kind == "tri6" else kind)
    if kind == "tri6":
        m = meshgen.to_p2(m)
    m.nodes = m.nodes + 1e-3 * np.sin(7 * m.nodes)
    path = write_mesh(m, tmp_path / "m.txt")
    r = read_mesh(path)
    assert r.kind == m.kind
    assert np.array_equal(r.nodes, m.nodes)
    assert np.array_equal(r.cells, m.cells)
    assert set(r.boundary) == set(m.boundary)
    for k in m.boundary:
        assert np.array_equal(r.boundary[k], m.boundary[k])


def test_mesh_file_format_header(tmp_path):
    text = write_mesh(one_triangle(), tmp_path / "t.txt").read_text().split("\n")
    assert text[0] == "$nodes 2 3"
    assert text[4] == "$elements tri3 1"


def test_bad_connectivity():
    with pytest.raises(MeshError):
        Mesh(np.zeros((3, 2)), [[0, 1, 3]], "tri3")


def test_boundary_faces_belong_to_one_element():
    m = meshgen.cantilever(6, 2)
    m.validate()
    faces = np.concatenate(list(m.boundary.values()))
    assert len({tuple(f) for f in faces}) == len(faces)
    assert len(faces) == len(exterior_faces(m))


def test_duplicate_boundary_face_rejected():
    m = meshgen.unit_square(2)
    f = m.boundary["boundary"][:1]
    m.boundary["again"] = f
    with pytest.raises(MeshError):
        m.validate()


def test_tag_boundary_predicates():
    m = tag_boundary(meshgen.grid([0, 1, 2], [0, 1]), {"left": lambda c: c[0] < 1e-9}, default="rest")
    left = m.boundary_nodes("left")
    assert len(left) == 2 and np.all(m.nodes[left, 0] == 0.0)
    assert np.all(m.nodes[m.boundary_nodes("rest"), 0] >= 0.0)
    assert len(m.boundary_nodes("rest")) == 6


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 47.99), st.floats(0.01, 0.99))
def test_locate_inverts_the_map(x, s):
    m = meshgen.cook_membrane(4)
    y = s * (44 + (60 - 44) * x / 48) + (1 - s) * (44 * x / 48)
    e, xi = locate(m, [x, y])
    assert np.allclose(geometry_map(m, e, xi)[0], [x, y], atol=1e-9)


def test_locate_outside():
    with pytest.raises(DomainError):
        locate(meshgen.unit_square(2), [1.5, 0.5])

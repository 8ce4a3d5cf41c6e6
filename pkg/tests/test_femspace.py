from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxwell_ipdg.femspace.basis import BasisError, reference_basis, scalar_dim
from maxwell_ipdg.femspace.quadrature import QuadratureError, quadrature
from maxwell_ipdg.femspace.space import (BrokenField, DGSpace, SpaceError, evaluate,
                                         evaluate_curl, project_L2)
from maxwell_ipdg.harness.cases import case_sine
from maxwell_ipdg.mesh import build_structured_mesh


def tet_monomial(a, b, c):
    return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)


def tri_monomial(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("domain, vol", [("tet", 1 / 6), ("triangle", 1 / 2)])
@pytest.mark.parametrize("degree", [0, 1, 4, 9, 14])
def test_weights_sum_to_volume(domain, vol, degree):
    r = quadrature(domain, degree)
    assert np.isclose(r.weights.sum(), vol, rtol=1e-14)
    assert np.all(r.weights > 0)
    assert np.all(r.points >= 0) and np.all(r.points.sum(axis=1) <= 1)


@pytest.mark.parametrize("degree", [2, 5, 8, 12])
def test_tet_exactness_all_monomials(degree):
    r = quadrature("tet", degree)
    x, y, z = r.points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                val = r.weights @ (x**a * y**b * z**c)
                assert abs(val - tet_monomial(a, b, c)) <= 1e-13 * tet_monomial(a, b, c)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_triangle_exactness(a, b):
    r = quadrature("triangle", a + b)
    x, y = r.points.T
    assert np.isclose(r.weights @ (x**a * y**b), tri_monomial(a, b), rtol=1e-13)


@pytest.mark.parametrize("args", [("tet", -1), ("tet", 31), ("cube", 2)])
def test_quadrature_errors(args):
    with pytest.raises(QuadratureError):
        quadrature(*args)


@pytest.mark.parametrize("degree", range(7))
def test_basis_orthonormal(degree):
    B = reference_basis(degree)
    r = quadrature("tet", 2 * degree)
    V = B.values(r.points)
    G = V.T @ (r.weights[:, None] * V)
    assert V.shape[1] == scalar_dim(degree) == (degree + 1) * (degree + 2) * (degree + 3) // 6
    assert np.abs(G - np.eye(len(G))).max() <= 1e-12


def test_basis_hierarchical_and_constant():
    pts = quadrature("tet", 6).points
    V6 = reference_basis(6).values(pts)
    for d in range(6):
        assert np.allclose(reference_basis(d).values(pts), V6[:, :scalar_dim(d)], atol=1e-13)
    assert np.allclose(V6[:, 0], np.sqrt(6.0))


@pytest.mark.parametrize("degree", [1, 3, 6])
def test_basis_gradients_finite_difference(degree, rng):
    B = reference_basis(degree)
    x = 0.2 * rng.random((5, 3)) + 0.1
    h = 1e-6
    g = B.gradients(x)
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        fd = (B.values(x + e) - B.values(x - e)) / (2 * h)
        assert np.allclose(g[:, :, d], fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("bad", [-1, 7])
def test_basis_degree_errors(bad):
    with pytest.raises(BasisError):
        reference_basis(bad)


def test_space_validation():
    m = build_structured_mesh(1)
    with pytest.raises(SpaceError):
        DGSpace(m, 5)
    with pytest.raises(SpaceError):
        DGSpace(m, 2, 0)
    with pytest.raises(SpaceError):
        BrokenField(DGSpace(m, 1), np.zeros(5))


def test_space_dimensions():
    s = DGSpace(build_structured_mesh(2), 2, 1)
    assert s.nb == 10 and s.nb_ell == 4
    assert s.ndofs == 48 * 3 * 10 and s.ndofs_ell == 48 * 3 * 4
    assert s.volume_degree == 6 and s.face_degree == 5 and s.boosted_degree() == 8


@pytest.mark.parametrize("k", [1, 2, 3])
def test_projection_reproduces_polynomials(k, rng):
    s = DGSpace(build_structured_mesh(2), k)
    A = rng.standard_normal((3, 3))

    def f(x):
        return (x @ A.T) ** k + 1.0

    v = project_L2(f, s)
    q = s.cell_quadrature(2 * k + 3)
    assert np.allclose(v.at_cell_quadrature(q), f(q.points), atol=1e-12)
    W = np.broadcast_to(np.diag([1.0, 2.0, 3.0]), (s.mesh.n_cells, 3, 3))
    vw = project_L2(f, s, weight=W)
    assert np.allclose(vw.coeffs, v.coeffs, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_projection_rate(k):
    c = case_sine(1.0)
    errs = []
    for n in (2, 4):
        s = DGSpace(build_structured_mesh(n), k)
        v = project_L2(c.E, s, quad_degree=2 * k + 2)
        q = s.cell_quadrature(2 * k + 4)
        e = c.E(q.points) - v.at_cell_quadrature(q)
        errs.append(np.sqrt(np.einsum("nq,nqc,nqc->", q.weights, e, e)))
    factor = errs[0] / errs[1]
    assert 0.7 * 2 ** (k + 1) <= factor <= 1.3 * 2 ** (k + 1)


def test_evaluate_matches_quadrature_and_curl(rng):
    s = DGSpace(build_structured_mesh(2), 2)
    v = BrokenField(s, rng.standard_normal(s.ndofs))
    q = s.cell_quadrature(3)
    K = 11
    assert np.allclose(evaluate(v, K, q.points[K]), v.at_cell_quadrature(q)[K], atol=1e-12)
    assert np.allclose(evaluate_curl(v, K, q.points[K]), v.curl_at_cell_quadrature(q)[K],
                       atol=1e-11)
    # curl by central differences of the polynomial restricted to K
    x = q.points[K][:2]
    h = 1e-6
    J = np.stack([(evaluate(v, K, x + h * e) - evaluate(v, K, x - h * e)) / (2 * h)
                  for e in np.eye(3)], axis=-1)
    curl = np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0],
                     J[:, 1, 0] - J[:, 0, 1]], axis=1)
    assert np.allclose(evaluate_curl(v, K, x), curl, atol=1e-6)


def test_face_traces_match_evaluate(rng):
    s = DGSpace(build_structured_mesh(2), 2)
    v = BrokenField(s, rng.standard_normal(s.ndofs))
    fq = s.face_quadrature()
    tr = v.at_face_quadrature(fq)
    m = s.mesh
    for f in (0, 5, m.n_faces - 1):
        for side in (0, 1):
            K = m.face_cells[f, side]
            if K < 0:
                continue
            assert np.allclose(tr[side, f], evaluate(v, K, fq.points[f]), atol=1e-12)
    assert np.isclose(fq.weights.sum(), m.face_areas.sum())


def test_broken_field_arithmetic(rng):
    s = DGSpace(build_structured_mesh(1), 1)
    a = BrokenField(s, rng.standard_normal(s.ndofs))
    b = BrokenField(s, rng.standard_normal(s.ndofs))
    assert np.allclose((a + b - b).coeffs, a.coeffs)
    assert np.allclose((a * 2.0).coeffs, 2 * a.coeffs)
    assert s.zero().coeffs.sum() == 0

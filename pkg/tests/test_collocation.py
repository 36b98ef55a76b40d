import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsqdae.collocation import (NodeFamily, assemble, collocation_nodes, direct_psi, dump_system,
                                gram_matrix, make_scheme, objective)
from lsqdae.errors import ArgumentError
from lsqdae.mesh import AnsatzElement, AnsatzSpace, evaluate_many, gauss_nodes, make_uniform_partition
from lsqdae.problems import linear_chain

from conftest import reference_interpolant, space_for


def exact_gram(tau):
    """Lagrange-basis product integrals by a 40-point Gauss rule (exact for these degrees)."""
    tau = np.asarray(tau, float)
    xq, wq = np.polynomial.legendre.leggauss(40)
    xq, wq = 0.5 * (xq + 1), 0.5 * wq
    M = tau.size
    L = np.ones((xq.size, M))
    for i in range(M):
        for j in range(M):
            if j != i:
                L[:, i] *= (xq - tau[j]) / (tau[i] - tau[j])
    return M * (L.T * wq) @ L


def test_single_node_gram():
    np.testing.assert_allclose(gram_matrix([0.5]), [[1.0]], atol=1e-15)


def test_two_gauss_nodes_give_identity():
    np.testing.assert_allclose(make_scheme(2, "gauss", N=1).gram, np.eye(2), atol=1e-12)


def test_two_uniform_nodes():
    sch = make_scheme(2, "uniform", N=1)
    np.testing.assert_allclose(sch.tau, [1 / 3, 2 / 3])
    np.testing.assert_allclose(sch.gram, [[2, -1], [-1, 2]], atol=1e-12)


@pytest.mark.parametrize("M", range(1, 9))
@pytest.mark.parametrize("family", list(NodeFamily))
def test_gram_matches_exact_integration(M, family):
    tau = collocation_nodes(M, family)
    np.testing.assert_allclose(gram_matrix(tau), exact_gram(tau), atol=1e-10 * M)


@pytest.mark.parametrize("M", range(1, 9))
def test_gauss_gram_is_weight_diagonal(M):
    tau = collocation_nodes(M, "gauss")
    np.testing.assert_allclose(gram_matrix(tau), np.diag(M * gauss_nodes(M)[1]), atol=1e-12)


@pytest.mark.parametrize("M", range(2, 11))
@pytest.mark.parametrize("family", ["uniform", "gauss"])
def test_gram_positive_definite(M, family):
    sch = make_scheme(M, family, N=M - 1)
    assert np.linalg.eigvalsh(sch.gram).min() > 0
    np.testing.assert_allclose(sch.gram_chol.T @ sch.gram_chol, sch.gram, atol=1e-12)
    assert np.all(np.diff(sch.tau) > 0) and 0 < sch.tau[0] and sch.tau[-1] < 1


def test_gram_partition_independent(pend):
    sch = make_scheme(4, "uniform", N=3)
    before = sch.gram.tobytes()
    for n in (3, 7):
        assemble(pend.sys, reference_interpolant(pend, n, 3), sch)
    assert sch.gram.tobytes() == before == make_scheme(4, "uniform", N=3).gram.tobytes()


def test_m_must_exceed_n():
    with pytest.raises(ArgumentError, match="M>N"):
        make_scheme(3, "uniform", N=3)


@pytest.mark.parametrize("n,N,M", [(1, 1, 2), (3, 2, 3), (4, 3, 5)])
def test_shapes(pend, n, N, M):
    res = assemble(pend.sys, reference_interpolant(pend, n, N), make_scheme(M, "gauss", N=N))
    m, k, l = 5, 4, 2
    assert res.r.shape == (n * M * m + l,)
    assert res.J.shape == (n * M * m + l, n * N * m + k)
    assert res.J.shape[0] > res.J.shape[1]


def test_exact_polynomial_solution_has_zero_residual():
    prob = linear_chain(3, solution="polynomial", degree=3, seed=2)
    elem = reference_interpolant(prob, 4, 3)
    assert objective(prob.sys, elem, make_scheme(4, "uniform", N=3)) <= 1e-20


def test_psi_matches_direct_formula(pend, rng):
    elem = reference_interpolant(pend, 6, 3)
    elem = elem.with_coeffs(elem.coeffs + 1e-2 * rng.normal(size=elem.space.dim))
    for fam in ("uniform", "gauss"):
        sch = make_scheme(4, fam, N=3, bc_weight=2.5)
        a, b = objective(pend.sys, elem, sch), direct_psi(pend.sys, elem, sch)
        assert abs(a - b) <= 1e-12 * b


def test_gauss_psi_is_quadrature_of_squared_residual(chain2, rng):
    """With Gauss nodes and a residual that is a polynomial of degree <= M-1 per
    interval, psi equals the integral of |f|^2 plus the boundary term."""
    sys = chain2.sys
    N, M = 2, 3
    sp = space_for(chain2, 5, N)
    elem = AnsatzElement(sp, rng.normal(size=sp.dim))
    # residual of the linear chain: polynomial degree <= N in t (q is smooth, so remove it)
    from dataclasses import replace
    lin = replace(sys, residual=lambda y, x, t: y @ sys.jac_y(y[:1], x[:1], t[:1])[0].T
                  + x @ sys.jac_x(y[:1], x[:1], t[:1])[0].T)
    psi = objective(lin, elem, make_scheme(M, "gauss", N=N))
    xq, wq = gauss_nodes(50)
    h = sp.partition.h
    t = (sp.partition.breakpoints[:-1, None] + h[:, None] * xq).ravel()
    w = (h[:, None] * wq).ravel()
    x, dx = evaluate_many(elem, t)
    f = lin.residual_batch(dx, x, t)
    g = lin.boundary(*evaluate_many(elem, np.array([sys.a, sys.b]))[0])
    oracle = w @ np.sum(f ** 2, axis=1) + np.sum(np.asarray(g) ** 2)
    assert abs(psi - oracle) <= 1e-10 * oracle


def test_jacobian_directional_fd(pend, rng):
    elem = reference_interpolant(pend, 5, 2)
    sch = make_scheme(3, "uniform", N=2)
    res = assemble(pend.sys, elem, sch)
    for _ in range(20):
        d = rng.normal(size=elem.space.dim)
        eps = 1e-6
        rp = assemble(pend.sys, elem.with_coeffs(elem.coeffs + eps * d), sch, with_jacobian=False).r
        rm = assemble(pend.sys, elem.with_coeffs(elem.coeffs - eps * d), sch, with_jacobian=False).r
        fd = (rp - rm) / (2 * eps)
        an = res.J.matvec(d)
        assert np.linalg.norm(fd - an) <= 1e-5 * np.linalg.norm(an)


@pytest.mark.parametrize("name", ["camo", "chain2", "manufactured"])
def test_jacobian_fd_all_builtins(request, name, rng):
    prob = request.getfixturevalue(name)
    elem = reference_interpolant(prob, 4, 3)
    sch = make_scheme(4, "gauss", N=3)
    res = assemble(prob.sys, elem, sch)
    d = rng.normal(size=elem.space.dim)
    eps = 1e-6
    rp = assemble(prob.sys, elem.with_coeffs(elem.coeffs + eps * d), sch, with_jacobian=False).r
    rm = assemble(prob.sys, elem.with_coeffs(elem.coeffs - eps * d), sch, with_jacobian=False).r
    assert np.linalg.norm((rp - rm) / (2 * eps) - res.J.matvec(d)) <= 1e-5 * np.linalg.norm(res.J.matvec(d))


def test_block_jacobian_views_agree(pend, rng):
    res = assemble(pend.sys, reference_interpolant(pend, 3, 2), make_scheme(3, "gauss", N=2))
    dense = res.J.toarray()
    np.testing.assert_array_equal(res.J.tosparse().toarray(), dense)
    z, w = rng.normal(size=dense.shape[1]), rng.normal(size=dense.shape[0])
    np.testing.assert_allclose(res.J.matvec(z), dense @ z, atol=1e-12)
    np.testing.assert_allclose(res.J.rmatvec(w), dense.T @ w, atol=1e-12)


def test_psi_decreases_for_refined_interpolants(pend):
    sch = make_scheme(4, "uniform", N=3)
    psis = [objective(pend.sys, reference_interpolant(pend, n, 3), sch) for n in (10, 20, 40)]
    assert psis[0] > psis[1] > psis[2]


def test_dump_system(tmp_path, pend):
    import scipy.io
    res = assemble(pend.sys, reference_interpolant(pend, 2, 2), make_scheme(3, "gauss", N=2))
    a, b = dump_system(tmp_path / "sys", res)
    np.testing.assert_allclose(scipy.io.mmread(a).toarray(), res.J.toarray())
    np.testing.assert_allclose(np.ravel(scipy.io.mmread(b)), res.r)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.02, 0.98), min_size=2, max_size=6, unique=True))
def test_gram_spd_for_arbitrary_nodes(nodes):
    tau = np.sort(nodes)
    if np.diff(tau).min() < 1e-2:
        return
    G = gram_matrix(tau)
    np.testing.assert_allclose(G, G.T, atol=1e-12)
    assert np.linalg.eigvalsh(G).min() > 0

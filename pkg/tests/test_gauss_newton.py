import dataclasses
import json

import numpy as np
import pytest

from lsqdae.collocation import assemble, make_scheme, objective
from lsqdae.errors import ArgumentError
from lsqdae.gauss_newton import GNConfig, Termination, descent_check, gn_solve
from lsqdae.lsq import solve_lsq
from lsqdae.mesh import AnsatzElement, AnsatzSpace, prolongate, refine_nested, zero_element
from lsqdae.problems import linear_chain

from conftest import reference_interpolant, space_for


def accepted_psis(trace):
    return [trace.psi_initial] + [r.psi for r in trace.records if r.damping_used > 0]


def test_config_validation():
    with pytest.raises(ArgumentError):
        GNConfig(max_iters=0)
    with pytest.raises(ArgumentError):
        GNConfig(step_tol=0.0)
    with pytest.raises(ArgumentError):
        GNConfig(damping="trust-region")


def test_pendulum_run_monotone_and_accurate(pend):
    elem, trace = gn_solve(pend.sys, make_scheme(4, "uniform", N=3), reference_interpolant(pend, 10, 3))
    psis = accepted_psis(trace)
    assert all(b <= a for a, b in zip(psis, psis[1:]))
    assert trace.termination in (Termination.NO_IMPROVEMENT, Termination.STEP_SMALL)
    assert trace.psi_final < 1e-4


def test_exact_start_stops_immediately():
    prob = linear_chain(2, solution="polynomial", degree=2, seed=3)
    x0 = reference_interpolant(prob, 5, 2)
    elem, trace = gn_solve(prob.sys, make_scheme(3, "uniform", N=2), x0)
    assert trace.psi_initial <= 1e-20
    assert trace.records[0].step_norm <= 1e-10
    assert trace.termination in (Termination.NO_IMPROVEMENT, Termination.STEP_SMALL)


@pytest.mark.parametrize("mu", [1, 2, 3])
def test_linear_problem_one_step(mu):
    prob = linear_chain(mu)
    sch = make_scheme(4, "gauss", N=3)
    x0 = zero_element(space_for(prob, 6, 3))
    res = assemble(prob.sys, x0, sch)
    z = solve_lsq(res.J.toarray(), res.r).z
    minimum = float(np.sum((res.J.toarray() @ z + res.r) ** 2))
    elem, trace = gn_solve(prob.sys, sch, x0, GNConfig(damping="none"))
    first = trace.records[0]
    assert first.damping_used == 1.0
    assert first.psi == pytest.approx(minimum, rel=1e-10)
    assert trace.psi_final == pytest.approx(minimum, rel=1e-10)


def test_descent_identity_pendulum(pend, rng):
    x0 = reference_interpolant(pend, 10, 3)
    x0 = x0.with_coeffs(x0.coeffs + 1e-3 * rng.normal(size=x0.space.dim))
    chk = descent_check(pend.sys, make_scheme(4, "uniform", N=3), x0)
    assert chk["directional_derivative"] < 0
    assert chk["directional_derivative"] == pytest.approx(chk["predicted_derivative"], rel=1e-4)


def test_descent_identity_linear(rng):
    prob = linear_chain(2)
    sp = space_for(prob, 4, 2)
    x0 = AnsatzElement(sp, rng.normal(size=sp.dim))
    chk = descent_check(prob.sys, make_scheme(3, "uniform", N=2), x0, fd_step=1e-3)
    assert chk["directional_derivative"] == pytest.approx(chk["predicted_derivative"], rel=1e-8)


def test_descent_at_stationary_point():
    prob = linear_chain(2, solution="polynomial", degree=2)
    chk = descent_check(prob.sys, make_scheme(3, "uniform", N=2), reference_interpolant(prob, 3, 2))
    assert abs(chk["directional_derivative"]) < 1e-12
    assert abs(chk["projected_residual_sq"]) < 1e-12


def test_psi_consistent_under_exact_embedding(rng):
    """Homogeneous constant-coefficient residuals of elements are per-interval
    polynomials of degree <= N, which M=N+1 Gauss nodes integrate exactly on
    any mesh, so the functional is preserved under prolongation."""
    prob = linear_chain(3)
    sys = prob.sys
    A = sys.jac_y(np.zeros((1, 3)), np.zeros((1, 4)), np.zeros(1))[0]
    B = sys.jac_x(np.zeros((1, 3)), np.zeros((1, 4)), np.zeros(1))[0]
    hom = dataclasses.replace(sys, residual=lambda y, x, t: y @ A.T + x @ B.T)
    sch = make_scheme(4, "gauss", N=3)
    sp = space_for(prob, 4, 3)
    x = AnsatzElement(sp, rng.normal(size=sp.dim))
    res = assemble(hom, x, sch)
    z = solve_lsq(res.J.toarray(), res.r).z
    fine = AnsatzSpace(refine_nested(sp.partition, 2), 3, sys.m, sys.k)
    for c in (x.coeffs, x.coeffs + z):
        e = x.with_coeffs(c)
        assert objective(hom, prolongate(e, fine), sch) == pytest.approx(objective(hom, e, sch), rel=1e-10)


def test_numerical_error_recorded(pend):
    calls = {"n": 0}

    def flaky(y, x, t):
        calls["n"] += 1
        if calls["n"] > 3:
            return np.full((len(t), 5), np.nan)
        return pend.sys.residual(y, x, t)

    sys = dataclasses.replace(pend.sys, residual=flaky)
    x0 = reference_interpolant(pend, 4, 2)
    elem, trace = gn_solve(sys, make_scheme(3, "uniform", N=2), x0)
    assert trace.termination in (Termination.NUMERICAL_ERROR, Termination.NO_IMPROVEMENT)
    assert np.all(np.isfinite(elem.coeffs))


def test_numerical_error_at_start(pend):
    sys = dataclasses.replace(pend.sys, residual=lambda y, x, t: np.full((len(t), 5), np.inf))
    x0 = reference_interpolant(pend, 2, 2)
    elem, trace = gn_solve(sys, make_scheme(3, "uniform", N=2), x0)
    assert trace.termination == Termination.NUMERICAL_ERROR
    assert elem is x0 and trace.message


def test_trace_jsonl(pend):
    _, trace = gn_solve(pend.sys, make_scheme(3, "uniform", N=2), reference_interpolant(pend, 4, 2))
    lines = [json.loads(s) for s in trace.to_jsonl().splitlines()]
    assert len(lines) == len(trace.records) + 1
    assert {"k", "psi", "residual_norm", "step_norm", "damping_used", "rank_estimate"} <= set(lines[0])
    assert lines[-1]["termination"] == trace.termination.value


def test_mismatched_space_rejected(pend):
    prob = linear_chain(2)
    with pytest.raises(ArgumentError):
        gn_solve(pend.sys, make_scheme(3, "uniform", N=2), zero_element(space_for(prob, 2, 2)))


def test_max_iters_respected(camo):
    _, trace = gn_solve(camo.sys, make_scheme(2, "gauss", N=1), zero_element(space_for(camo, 10, 1)),
                        GNConfig(max_iters=3))
    assert len(trace.records) <= 3

"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line in the summary."""

import time

import numpy as np
import pytest

from lsqdae.collocation import assemble, make_scheme, objective
from lsqdae.gauss_newton import GNConfig, Termination, descent_check, gn_solve
from lsqdae.lsq import optimality_residual, perturbation_check
from lsqdae.mesh import gauss_nodes, zero_element
from lsqdae.metrics import estimate_orders, run_convergence_study, run_sv_scan
from lsqdae.multilevel import MultilevelConfig, multilevel_solve
from lsqdae.problems import campbell_moore, linear_chain, manufactured_in_space, pendulum

from conftest import reference_interpolant
from reference_tables import (CAMPBELL_MOORE_H1D, CAMPBELL_MOORE_N, CAMPBELL_MOORE_N5_ORD, PENDULUM_COLUMNS,
                              PENDULUM_N3_ERR, PENDULUM_N3_N, PENDULUM_N3_ORD, PENDULUM_N5_N, PENDULUM_N5_ORD)

REPORT = {}


class Checks:
    """Collects the sub-checks of one criterion and reports them together."""

    def __init__(self, key):
        self.key = key
        self.failures = []
        self.notes = []

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)
        return ok

    def note(self, text):
        self.notes.append(text)

    def finish(self):
        ok = not self.failures
        detail = "; ".join(self.notes)
        if not ok:
            shown = self.failures[:4] + ([f"... {len(self.failures) - 4} more"] if len(self.failures) > 4 else [])
            detail = f"{len(self.failures)} failed check(s): " + "; ".join(shown) + (f" | {detail}" if detail else "")
        REPORT[self.key] = (ok, detail)
        assert ok, detail


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _published_order(study):
    return study.error_matrix(h1d=False)[:, PENDULUM_COLUMNS]


@pytest.fixture(scope="module")
def pend():
    return pendulum()


@pytest.fixture(scope="module")
def pend_n3(pend):
    return _timed(run_convergence_study, pend, 3, 4, "uniform", PENDULUM_N3_N)


@pytest.fixture(scope="module")
def camo_runs():
    prob = campbell_moore()
    n_list = CAMPBELL_MOORE_N[:5]
    t0 = time.perf_counter()
    runs = {N: run_convergence_study(prob, N, N + 1, "gauss", n_list) for N in range(1, 6)}
    return runs, time.perf_counter() - t0


def test_criterion_1_pendulum_n3(pend_n3):
    c = Checks(1)
    study, elapsed = pend_n3
    c.check(not study.failed, "all rows solved")
    E = _published_order(study)
    ratio = np.maximum(E / PENDULUM_N3_ERR, PENDULUM_N3_ERR / E)
    names = ["x", "x'", "y", "y'", "lambda"]
    for i, n in enumerate(PENDULUM_N3_N):
        for j, name in enumerate(names):
            c.check(ratio[i, j] <= 3.0, f"n={n} {name} err {E[i, j]:.2e} vs {PENDULUM_N3_ERR[i, j]:.2e}")
    orders = np.array([estimate_orders(E[i:i + 2])[0] for i in range(len(E) - 1)])
    for i, n in enumerate(PENDULUM_N3_N[1:]):
        for j, name in enumerate(names):
            c.check(abs(orders[i, j] - PENDULUM_N3_ORD[i, j]) <= 0.3,
                    f"n={n} {name} order {orders[i, j]:.1f} vs {PENDULUM_N3_ORD[i, j]:.1f}")
    c.check(elapsed < 300, f"runtime {elapsed:.0f}s")
    c.note("worst error ratio per column " + ", ".join(f"{n}={r:.2g}" for n, r in zip(names, ratio.max(axis=0))))
    c.note(f"final orders {np.round(orders[-1], 1).tolist()}; runtime {elapsed:.1f}s")
    c.finish()


def test_criterion_2_pendulum_n5(pend):
    c = Checks(2)
    study, elapsed = _timed(run_convergence_study, pend, 5, 6, "uniform", PENDULUM_N5_N)
    c.check(not study.failed, "all rows solved")
    E = _published_order(study)
    names = ["x", "x'", "y", "y'", "lambda"]
    orders = np.array([estimate_orders(E[i:i + 2])[0] for i in range(len(E) - 1)])
    skipped = 0
    for i, n in enumerate(PENDULUM_N5_N[1:]):
        for j, name in enumerate(names):
            if E[i + 1, j] <= 1e-11:       # below round-off: documented, not asserted
                skipped += 1
                continue
            c.check(abs(orders[i, j] - PENDULUM_N5_ORD[i, j]) <= 0.4,
                    f"n={n} {name} order {orders[i, j]:.1f} vs {PENDULUM_N5_ORD[i, j]:.1f}")
    c.check(elapsed < 300, f"runtime {elapsed:.0f}s")
    c.note(f"lambda orders {np.round(orders[:, 4], 1).tolist()}; {skipped} entries at round-off skipped; "
           f"runtime {elapsed:.1f}s")
    c.finish()


def test_criterion_3_campbell_moore(camo_runs):
    c = Checks(3)
    runs, elapsed = camo_runs
    for N, st in runs.items():
        c.check(N == 1 or not st.failed, f"N={N} all rows solved")
    h5 = np.array([r.h1d for r in runs[5].rows])
    ref5 = CAMPBELL_MOORE_H1D[:5, 4]
    for n, e, ref in zip(CAMPBELL_MOORE_N, h5, ref5):
        c.check(max(e / ref, ref / e) <= 5.0, f"N=5 n={n} H1_D {e:.2e} vs {ref:.2e}")
    floor = np.sqrt(runs[5].rows[-1].psi_final)
    ord5 = estimate_orders(h5)
    valid = 0
    for i, n in enumerate(CAMPBELL_MOORE_N[1:5]):
        if h5[i + 1] <= 100 * floor:
            continue
        valid += 1
        published = CAMPBELL_MOORE_N5_ORD[i]
        # rows where the published run had already stagnated are held to the rate 3
        target = published if published > 2.0 else 3.0
        c.check(abs(ord5[i] - target) <= 0.3, f"N=5 n={n} order {ord5[i]:.2f} vs {target}")
    c.check(valid >= 3, f"{valid} valid rows for the N=5 order")
    h1 = np.array([r.h1d for r in runs[1].rows])
    c.check(np.all(np.isfinite(h1)) and h1.max() <= 10 * 3.32e1, f"N=1 column max {np.nanmax(h1):.3g}")
    for N in (2, 3, 4):
        h = np.array([r.h1d for r in runs[N].rows])
        c.check(np.all(np.diff(h) < 0), f"N={N} errors decrease")
    c.check(elapsed < 900, f"runtime {elapsed:.0f}s")
    c.note(f"N=5 H1_D {', '.join(f'{e:.2e}' for e in h5)}; orders {np.round(ord5, 2).tolist()}; "
           f"N=1 max {h1.max():.3g}; runtime {elapsed:.1f}s")
    c.finish()


def test_criterion_4_exactness():
    c = Checks(4)
    rng = np.random.default_rng(7)
    for N, n in ((3, 8), (2, 5)):
        prob = manufactured_in_space(N=N, n=n, seed=3)
        exact = prob.exact_element
        for fam in ("uniform", "gauss"):
            sch = make_scheme(N + 1, fam, N=N)
            psi = objective(prob.sys, exact, sch)
            c.check(psi <= 1e-18, f"N={N} {fam} psi(exact)={psi:.1e}")
            start = exact.with_coeffs(exact.coeffs + 1e-3 * rng.standard_normal(exact.space.dim))
            elem, trace = gn_solve(prob.sys, sch, start)
            err = float(np.abs(elem.coeffs - exact.coeffs).max())
            c.check(err <= 1e-8, f"N={N} {fam} recovered coefficient error {err:.1e}")
            c.note(f"N={N} {fam}: psi {psi:.0e}, error {err:.0e} in {trace.iterations} steps")
    c.finish()


def test_criterion_5_gram(pend):
    c = Checks(5)
    L = make_scheme(2, "uniform", N=1).gram
    c.check(np.abs(L - np.array([[2.0, -1.0], [-1.0, 2.0]])).max() <= 1e-12, f"M=2 uniform Gram {L.tolist()}")
    for M in range(2, 9):
        _, w = gauss_nodes(M)
        G = make_scheme(M, "gauss", N=M - 1).gram
        c.check(np.abs(G - np.diag(M * w)).max() <= 1e-12, f"M={M} Gauss Gram diagonal")
    for M in range(2, 11):
        for fam in ("uniform", "gauss"):
            ev = np.linalg.eigvalsh(make_scheme(M, fam, N=M - 1).gram).min()
            c.check(ev > 0, f"M={M} {fam} positive definite (min eigenvalue {ev:.1e})")
    sch = make_scheme(4, "uniform", N=3)
    before = sch.gram.tobytes()
    for n in (3, 10, 17):
        assemble(pend.sys, reference_interpolant(pend, n, 3), sch)
    c.check(sch.gram.tobytes() == before == make_scheme(4, "uniform", N=3).gram.tobytes(),
            "Gram bytes independent of the partition")
    c.note("M=2 exact, Gauss M<=8 diagonal, M=2..10 positive definite, partition-independent")
    c.finish()


def test_criterion_6_sv_scan():
    c = Checks(6)
    t0 = time.perf_counter()
    slopes = {}
    for mu in (1, 2, 3):
        scan = run_sv_scan(linear_chain(mu), 3, 4, "uniform", (16, 32, 64, 128))
        slopes[mu] = scan.slope
        c.check(abs(scan.slope - (mu - 1)) <= 0.4, f"mu={mu} slope {scan.slope:.2f}")
    elapsed = time.perf_counter() - t0
    c.check(elapsed < 120, f"runtime {elapsed:.0f}s")
    c.note("slopes " + ", ".join(f"mu={m}: {s:.2f}" for m, s in slopes.items()) + f"; runtime {elapsed:.1f}s")
    c.finish()


def _monotone(trace):
    psis = [trace.psi_initial] + [r.psi for r in trace.records]
    return all(b <= a for a, b in zip(psis, psis[1:]))


def test_criterion_7_solver(pend):
    c = Checks(7)
    camo = campbell_moore()
    runs = 0
    rng = np.random.default_rng(11)
    for prob, N, fam, n_list in ((pend, 3, "uniform", (10, 40, 160)), (pend, 5, "uniform", (10, 40)),
                                 (camo, 2, "gauss", (10, 40)), (camo, 5, "gauss", (10, 40)),
                                 (linear_chain(2), 3, "uniform", (8, 32))):
        sch = make_scheme(N + 1, fam, N=N)
        for n in n_list:
            x0 = reference_interpolant(prob, n, N)
            for scale in (0.0, 1e-2):
                start = x0.with_coeffs(x0.coeffs + scale * rng.standard_normal(x0.space.dim))
                _, trace = gn_solve(prob.sys, sch, start)
                runs += 1
                c.check(trace.termination != Termination.NUMERICAL_ERROR and _monotone(trace),
                        f"{prob.name} N={N} n={n} perturbation {scale}: psi non-increasing")
    worst_opt = 0.0
    for mu in (1, 2, 3):
        prob = linear_chain(mu)
        sch = make_scheme(4, "uniform", N=3)
        x0 = zero_element(reference_interpolant(prob, 16, 3).space)
        r0 = assemble(prob.sys, x0, sch, with_jacobian=True)
        x1, _ = gn_solve(prob.sys, sch, x0, GNConfig(max_iters=1))
        r1 = assemble(prob.sys, x1, sch, with_jacobian=True)
        _, g1 = optimality_residual(r1.J, r1.r, np.zeros(x1.space.dim))
        _, g0 = optimality_residual(r0.J, r0.r, np.zeros(x0.space.dim))
        worst_opt = max(worst_opt, g1 / g0)
        c.check(g1 <= 1e-10 * g0, f"linear chain mu={mu}: relative optimality after one step {g1 / g0:.1e}")
    worst_descent = 0.0
    sch = make_scheme(4, "uniform", N=3)
    for n, scale in ((10, 1e-2), (20, 1e-3), (10, 5e-2)):
        x0 = reference_interpolant(pend, n, 3)
        start = x0.with_coeffs(x0.coeffs + scale * rng.standard_normal(x0.space.dim))
        d = descent_check(pend.sys, sch, start)
        rel = abs(d["directional_derivative"] - d["predicted_derivative"]) / abs(d["predicted_derivative"])
        worst_descent = max(worst_descent, rel)
        c.check(rel <= 1e-4, f"descent identity n={n} perturbation {scale}: relative deviation {rel:.1e}")
    c.note(f"{runs} runs non-increasing; one-step optimality {worst_opt:.1e}; descent deviation {worst_descent:.1e}")
    c.finish()


def test_criterion_8_multilevel(pend):
    c = Checks(8)
    n_list = [10, 20, 40, 80, 160]
    cold = run_convergence_study(pend, 3, 4, "uniform", n_list)
    sch = make_scheme(4, "uniform", N=3)
    x0 = reference_interpolant(pend, n_list[0], 3)
    levels = multilevel_solve(pend.sys, sch, x0.space, x0, MultilevelConfig(levels=len(n_list), q_inverse=2))
    c.check([lvl.n for lvl in levels] == n_list, "all levels solved")
    for lvl, row in zip(levels, cold.rows):
        ratio = np.maximum(lvl.errors.l2 / row.errors, row.errors / lvl.errors.l2).max()
        c.check(ratio <= 2.0, f"n={lvl.n} warm/cold error ratio {ratio:.2f}")
    warm_total = sum(lvl.trace.iterations for lvl in levels)
    cold_total = sum(r.gn_iters for r in cold.rows)
    c.check(warm_total <= cold_total, f"iterations warm {warm_total} vs cold {cold_total}")
    c.note(f"iterations warm {warm_total} vs cold {cold_total}")
    c.finish()


def test_criterion_9_weyl():
    c = Checks(9)
    rng = np.random.default_rng(2024)
    worst = -np.inf
    for i in range(100):
        m = int(rng.integers(1, 30))
        k = int(rng.integers(1, 30))
        A = rng.standard_normal((m, k))
        B = A + 10.0 ** rng.uniform(-8, 1) * rng.standard_normal((m, k))
        res = perturbation_check(A, B)
        worst = max(worst, res["sv_deviation_max"] - res["bound"])
        c.check(res["sv_deviation_max"] <= res["bound"] + 1e-10, f"pair {i} ({m}x{k})")
    c.note(f"100 pairs, max(deviation - bound) = {worst:.1e}")
    c.finish()

import sys

import numpy as np
import pytest

from lsqdae.collocation import make_scheme
from lsqdae.mesh import AnsatzSpace, interpolate, make_uniform_partition
from lsqdae.problems import campbell_moore, linear_chain, manufactured_in_space, pendulum


@pytest.fixture(scope="session")
def pend():
    return pendulum()


@pytest.fixture(scope="session")
def camo():
    return campbell_moore()


@pytest.fixture(scope="session")
def chain2():
    return linear_chain(2)


@pytest.fixture(scope="session")
def manufactured():
    return manufactured_in_space(N=3, n=8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def space_for(problem, n, N):
    sys = problem.sys
    return AnsatzSpace(make_uniform_partition(sys.a, sys.b, n), N, sys.m, sys.k)


def reference_interpolant(problem, n, N):
    sys = problem.sys
    return interpolate(space_for(problem, n, N), lambda t: sys.reference_batch(t)[0], vectorized=True)


def scheme_for(N, family="uniform", M=None):
    return make_scheme(N + 1 if M is None else M, family, N=N)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        ok, detail = lines[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")

"""Built-in benchmark problems with reference solutions."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import solve_ivp

from .dae import DAESystem
from .errors import ArgumentError
from .mesh import AnsatzElement, AnsatzSpace, evaluate_many, interpolate, make_uniform_partition


@dataclass(frozen=True)
class BenchmarkProblem:
    sys: DAESystem
    name: str
    default_interval: tuple[float, float]
    consistent_initial_point: np.ndarray
    notes: str = ""
    exact_element: Optional[AnsatzElement] = field(default=None, repr=False)

    def __post_init__(self):
        if self.sys.reference_solution is not None:
            defect = reference_defect(self.sys)
            if defect > 1e-10:
                raise ArgumentError(f"reference solution of {self.name!r} has defect {defect:.3e}")


def reference_defect(sys: DAESystem, samples: int = 200) -> float:
    """Max of residual and boundary defects of the reference solution."""
    t = np.linspace(sys.a, sys.b, samples)
    x, dx = sys.reference_batch(t)
    f = sys.residual_batch(dx, x, t)
    ends, _ = sys.reference_batch([sys.a, sys.b])
    g = np.asarray(sys.boundary(ends[0], ends[1]), float)
    return float(max(np.abs(f).max(), np.abs(g).max(initial=0.0)))


# -- pendulum ---------------------------------------------------------------

PENDULUM_G = 16.0
PENDULUM_L2 = 8.0
PENDULUM_CACHE_VERSION = 1
PENDULUM_RTOL = 1e-13
PENDULUM_ATOL = 1e-13
_PIECES = 16
_DEGREE = 24


def _pendulum_lambda(q):
    return (q[2] ** 2 + q[3] ** 2 - PENDULUM_G * q[1]) / PENDULUM_L2


def _pendulum_rhs(t, q):
    lam = _pendulum_lambda(q)
    return np.array([q[2], q[3], -q[0] * lam, -q[1] * lam - PENDULUM_G])


def cache_dir() -> Path:
    env = os.environ.get("LSQDAE_CACHE_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "lsqdae"


def generate_pendulum_table(t_end: float = 1.0):
    """Integrate the index-0 reduction and fit piecewise Chebyshev series to it."""
    q0 = np.array([2.0, 2.0, 0.0, 0.0])
    sol = solve_ivp(_pendulum_rhs, (0.0, t_end), q0, method="DOP853",
                    rtol=PENDULUM_RTOL, atol=PENDULUM_ATOL, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"pendulum reference integration failed: {sol.message}")
    breaks = np.linspace(0.0, t_end, _PIECES + 1)
    coeffs = np.empty((_PIECES, _DEGREE + 1, 4))
    cheb = np.cos(np.pi * (np.arange(_DEGREE + 1) + 0.5) / (_DEGREE + 1))
    for i in range(_PIECES):
        lo, hi = breaks[i], breaks[i + 1]
        ts = 0.5 * (lo + hi) + 0.5 * (hi - lo) * cheb
        vals = sol.sol(ts)
        for c in range(4):
            coeffs[i, :, c] = C.chebfit(cheb, vals[c], _DEGREE)
    return breaks, coeffs


def load_pendulum_table(path: Optional[Path] = None):
    path = Path(path) if path is not None else cache_dir() / f"pendulum_ref_v{PENDULUM_CACHE_VERSION}.npz"
    if path.exists():
        with np.load(path) as data:
            if int(data["version"]) == PENDULUM_CACHE_VERSION and float(data["rtol"]) == PENDULUM_RTOL:
                return data["breaks"].copy(), data["coeffs"].copy()
    breaks, coeffs = generate_pendulum_table()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path.parent, suffix=".npz", delete=False) as fh:
            np.savez(fh, version=PENDULUM_CACHE_VERSION, rtol=PENDULUM_RTOL, atol=PENDULUM_ATOL,
                     method="DOP853", breaks=breaks, coeffs=coeffs)
        os.replace(fh.name, path)
    except OSError:
        pass
    return breaks, coeffs


def _pendulum_reference(breaks, coeffs):
    n = breaks.size - 1

    def ref(t):
        t = np.atleast_1d(np.asarray(t, float))
        i = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, n - 1)
        s = (2 * t - breaks[i] - breaks[i + 1]) / (breaks[i + 1] - breaks[i])
        q = np.empty((t.size, 4))
        for piece in np.unique(i):
            sel = i == piece
            q[sel] = C.chebval(s[sel], coeffs[piece]).T
        lam = _pendulum_lambda(q.T)
        x = np.column_stack([q, lam])
        dx = np.column_stack([q[:, 2], q[:, 3], -q[:, 0] * lam, -q[:, 1] * lam - PENDULUM_G])
        return x, dx

    return ref


def pendulum(table_path: Optional[Path] = None) -> BenchmarkProblem:
    """Index-3 pendulum in first-order form, components ``(x, y, x', y', lambda)``."""
    g, L2 = PENDULUM_G, PENDULUM_L2

    def residual(y, x, t):
        return np.column_stack([
            y[:, 0] - x[:, 2],
            y[:, 1] - x[:, 3],
            y[:, 2] + x[:, 0] * x[:, 4],
            y[:, 3] + x[:, 1] * x[:, 4] + g,
            x[:, 0] ** 2 + x[:, 1] ** 2 - L2,
        ])

    def jac_y(y, x, t):
        A = np.zeros((y.shape[0], 5, 4))
        A[:, :4, :] = np.eye(4)
        return A

    def jac_x(y, x, t):
        B = np.zeros((x.shape[0], 5, 5))
        B[:, 0, 2] = -1.0
        B[:, 1, 3] = -1.0
        B[:, 2, 0] = x[:, 4]
        B[:, 2, 4] = x[:, 0]
        B[:, 3, 1] = x[:, 4]
        B[:, 3, 4] = x[:, 1]
        B[:, 4, 0] = 2 * x[:, 0]
        B[:, 4, 1] = 2 * x[:, 1]
        return B

    def boundary(u, v):
        return np.array([u[1] - 2.0, u[3]])

    def boundary_jac(u, v):
        gu = np.zeros((2, 5))
        gu[0, 1] = 1.0
        gu[1, 3] = 1.0
        return gu, np.zeros((2, 5))

    breaks, coeffs = load_pendulum_table(table_path)
    sys = DAESystem(m=5, k=4, l=2, mu=3, interval=(0.0, 1.0), residual=residual, boundary=boundary,
                    jac_y=jac_y, jac_x=jac_x, boundary_jac=boundary_jac,
                    reference_solution=_pendulum_reference(breaks, coeffs), vectorized=True,
                    name="pendulum")
    return BenchmarkProblem(sys, "pendulum", (0.0, 1.0), np.array([2.0, 2.0, 0.0, 0.0, -4.0]),
                            notes=f"g={g}, L=sqrt({L2}); reference from DOP853 (rtol={PENDULUM_RTOL}) "
                                  "on the index-0 reduction, x(0)=+2 branch")


def pendulum_hidden_constraints(x):
    """Position, velocity and acceleration constraint defects along states ``x`` (P, 5)."""
    x = np.atleast_2d(x)
    pos = x[:, 0] ** 2 + x[:, 1] ** 2 - PENDULUM_L2
    vel = x[:, 0] * x[:, 2] + x[:, 1] * x[:, 3]
    acc = x[:, 2] ** 2 + x[:, 3] ** 2 - PENDULUM_L2 * x[:, 4] - PENDULUM_G * x[:, 1]
    return pos, vel, acc


# -- Campbell-Moore ----------------------------------------------------------

def campbell_moore(rho: float = 5.0, r: float = 10.0, t_end: float = 5.0) -> BenchmarkProblem:
    """Index-3 robot-arm-like problem on a torus; multiplier ``x7`` vanishes on the solution.

    Boundary conditions fix the tangential coordinates ``(x2, x3, x5, x6)`` at
    ``t = 0``; the normal ones ``x1, x4`` are determined by the constraint and
    its hidden derivative.
    """

    def residual(y, x, t):
        s = np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2)
        s = np.where(s > 0, s, np.nan)        # torus axis: surfaces as DomainError
        phi = 1.0 - r / s
        ct, st = np.cos(t), np.sin(t)
        return np.column_stack([
            y[:, 0] - x[:, 3],
            y[:, 1] - x[:, 4],
            y[:, 2] - x[:, 5],
            y[:, 3] - x[:, 5] * ct + x[:, 2] * st + x[:, 4] - 2 * x[:, 0] * phi * x[:, 6],
            y[:, 4] - x[:, 5] * st - x[:, 2] * ct - x[:, 3] - 2 * x[:, 1] * phi * x[:, 6],
            y[:, 5] + x[:, 2] - 2 * x[:, 2] * x[:, 6],
            x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2 - 2 * r * s + r ** 2 - rho ** 2,
        ])

    def jac_y(y, x, t):
        A = np.zeros((y.shape[0], 7, 6))
        A[:, :6, :] = np.eye(6)
        return A

    def jac_x(y, x, t):
        x1, x2, x3, x7 = x[:, 0], x[:, 1], x[:, 2], x[:, 6]
        s = np.sqrt(x1 ** 2 + x2 ** 2)
        s = np.where(s > 0, s, np.nan)
        phi = 1.0 - r / s
        s3 = s ** 3
        ct, st = np.cos(t), np.sin(t)
        B = np.zeros((x.shape[0], 7, 7))
        B[:, 0, 3] = B[:, 1, 4] = B[:, 2, 5] = -1.0
        B[:, 3, 0] = -2 * x7 * (phi + r * x1 ** 2 / s3)
        B[:, 3, 1] = -2 * x7 * r * x1 * x2 / s3
        B[:, 3, 2] = st
        B[:, 3, 4] = 1.0
        B[:, 3, 5] = -ct
        B[:, 3, 6] = -2 * x1 * phi
        B[:, 4, 0] = -2 * x7 * r * x1 * x2 / s3
        B[:, 4, 1] = -2 * x7 * (phi + r * x2 ** 2 / s3)
        B[:, 4, 2] = -ct
        B[:, 4, 3] = -1.0
        B[:, 4, 5] = -st
        B[:, 4, 6] = -2 * x2 * phi
        B[:, 5, 2] = 1.0 - 2 * x7
        B[:, 5, 6] = -2 * x3
        B[:, 6, 0] = 2 * x1 * phi
        B[:, 6, 1] = 2 * x2 * phi
        B[:, 6, 2] = 2 * x3
        return B

    def reference(t):
        t = np.atleast_1d(np.asarray(t, float))
        ct, st = np.cos(t), np.sin(t)
        rad = rho * ct + r
        x = np.column_stack([
            rad * ct, rad * st, -rho * st,
            -rad * st - rho * st * ct,
            rad * ct - rho * st * st,
            -rho * ct,
            np.zeros_like(t),
        ])
        # derivatives of x1..x6
        dx = np.column_stack([
            x[:, 3], x[:, 4], x[:, 5],
            -rho * ct * ct + 2 * rho * st * st - rad * ct,
            -4 * rho * st * ct - r * st,
            rho * st,
        ])
        return x, dx

    fixed = (1, 2, 4, 5)
    x0, _ = reference([0.0])
    target = x0[0, list(fixed)]

    def boundary(u, v):
        return np.asarray(u)[list(fixed)] - target

    def boundary_jac(u, v):
        gu = np.zeros((4, 7))
        for row, col in enumerate(fixed):
            gu[row, col] = 1.0
        return gu, np.zeros((4, 7))

    sys = DAESystem(m=7, k=6, l=4, mu=3, interval=(0.0, t_end), residual=residual, boundary=boundary,
                    jac_y=jac_y, jac_x=jac_x, boundary_jac=boundary_jac, reference_solution=reference,
                    vectorized=True, name="campbell-moore")
    return BenchmarkProblem(sys, "campbell-moore", (0.0, t_end), x0[0],
                            notes=f"rho={rho}, r={r}; initial conditions on x2, x3, x5, x6 at t=0")


# -- linear index-mu chain ----------------------------------------------------

class _Smooth:
    """``amp * sin(freq * t + phase) + shift`` with its derivative."""

    def __init__(self, amp, freq, phase, shift=0.0):
        self.amp, self.freq, self.phase, self.shift = amp, freq, phase, shift

    def __call__(self, t):
        return self.amp * np.sin(self.freq * t + self.phase) + self.shift

    def deriv(self):
        return _Smooth(self.amp * self.freq, self.freq, self.phase + np.pi / 2)


def linear_chain(mu: int, lam: float = -1.0, solution: str = "smooth", degree: int = 2,
                 seed: int = 0, scale: float = 1.0) -> BenchmarkProblem:
    """Linear constant-coefficient DAE of tractability index ``mu``.

    Components are ``(u, y_2, ..., y_mu, y_1)``: a scalar ODE
    ``u' = lam*u + y_1 + q_0`` driven by the nilpotent chain
    ``y_{i+1}' + y_i = q_i`` (``i < mu``), ``y_mu = q_mu``.  ``u`` carries the
    single boundary condition at ``a``.  The exact solution is a smooth
    trigonometric function, or with ``solution="polynomial"`` a random
    polynomial of degree ``degree`` (``degree - 1`` in the algebraic slot
    ``y_1``) so that it lies in the ansatz space for ``N >= degree``.
    ``scale`` multiplies all equations.
    """
    if not (isinstance(mu, (int, np.integer)) and 1 <= mu <= 4):
        raise ArgumentError("mu must be an integer in 1..4")
    m, k = mu + 1, mu
    rng = np.random.default_rng(seed)
    if solution == "smooth":
        comps = [_Smooth(1.0, 1.0, 0.3, 1.0)] + [_Smooth(1.0 / i, 1.0 + 0.5 * i, 0.7 * i) for i in range(1, mu + 1)]
    elif solution == "polynomial":
        comps = [np.polynomial.Polynomial(rng.uniform(-1, 1, degree + 1))]
        for i in range(1, mu + 1):
            deg = degree - 1 if i == 1 else degree
            comps.append(np.polynomial.Polynomial(rng.uniform(-1, 1, max(deg, 0) + 1)))
    else:
        raise ArgumentError("solution must be 'smooth' or 'polynomial'")
    u_ex, ys = comps[0], comps[1:]                     # ys[i-1] = y_i
    dys = [p.deriv() for p in ys]
    du = u_ex.deriv()
    # position of y_i in the state vector
    pos = {1: mu, **{i: i - 1 for i in range(2, mu + 1)}}

    def q(t):
        out = [du(t) - lam * u_ex(t) - ys[0](t)]
        for i in range(1, mu):
            out.append(dys[i](t) + ys[i - 1](t))
        out.append(ys[mu - 1](t))
        return np.column_stack(out)

    A = np.zeros((m, k))
    B = np.zeros((m, m))
    A[0, 0] = 1.0
    B[0, 0] = -lam
    B[0, pos[1]] = -1.0
    for i in range(1, mu):
        A[i, i] = 1.0                                  # y_{i+1}' sits in derivative slot i
        B[i, pos[i]] = 1.0
    B[mu, pos[mu]] = 1.0
    A *= scale
    B *= scale

    def residual(y, x, t):
        return y @ A.T + x @ B.T - scale * q(t)

    def jac_y(y, x, t):
        return np.broadcast_to(A, (y.shape[0], m, k)).copy()

    def jac_x(y, x, t):
        return np.broadcast_to(B, (x.shape[0], m, m)).copy()

    a_val = float(u_ex(0.0))

    def boundary(u, v):
        return np.array([u[0] - a_val])

    def boundary_jac(u, v):
        gu = np.zeros((1, m))
        gu[0, 0] = 1.0
        return gu, np.zeros((1, m))

    def reference(t):
        t = np.atleast_1d(np.asarray(t, float))
        x = np.empty((t.size, m))
        x[:, 0] = u_ex(t)
        for i in range(1, mu + 1):
            x[:, pos[i]] = ys[i - 1](t)
        dx = np.empty((t.size, k))
        dx[:, 0] = du(t)
        for i in range(2, mu + 1):
            dx[:, i - 1] = dys[i - 1](t)
        return x, dx

    sys = DAESystem(m=m, k=k, l=1, mu=mu, interval=(0.0, 1.0), residual=residual, boundary=boundary,
                    jac_y=jac_y, jac_x=jac_x, boundary_jac=boundary_jac, reference_solution=reference,
                    vectorized=True, name=f"chain:{mu}")
    x0, _ = reference([0.0])
    return BenchmarkProblem(sys, f"chain:{mu}", (0.0, 1.0), x0[0],
                            notes=f"linear index-{mu} chain, lam={lam}, {solution} solution")


# -- manufactured problem with an in-space solution ---------------------------

def manufactured_in_space(N: int = 3, n: int = 8, seed: int = 0) -> BenchmarkProblem:
    """Nonlinear index-1 system whose exact solution is an element of the ansatz space.

    ``f(y, x, t) = phi(y, x) - phi(y_e(t), x_e(t))`` with
    ``phi = (y1 - x2*x3, y2 + sin x1, x3 + x3**3/10 - x1*x2)`` and ``x_e`` the
    nodal interpolant of a smooth function on the uniform ``n``-interval mesh of
    ``[0, 1]``, so the zero-residual minimizer is ``x_e`` itself.
    """
    rng = np.random.default_rng(seed)
    ph = rng.uniform(0, 1, 3)
    space = AnsatzSpace(make_uniform_partition(0.0, 1.0, n), N, 3, 2)
    exact = interpolate(space, lambda t: np.array([
        1.0 + 0.5 * np.sin(2 * t + ph[0]), np.cos(3 * t + ph[1]), 0.5 + 0.3 * np.sin(4 * t + ph[2])]))

    def phi(y, x):
        return np.column_stack([
            y[:, 0] - x[:, 1] * x[:, 2],
            y[:, 1] + np.sin(x[:, 0]),
            x[:, 2] + 0.1 * x[:, 2] ** 3 - x[:, 0] * x[:, 1],
        ])

    def residual(y, x, t):
        xe, ye = evaluate_many(exact, t)
        return phi(y, x) - phi(ye, xe)

    def jac_y(y, x, t):
        A = np.zeros((y.shape[0], 3, 2))
        A[:, 0, 0] = A[:, 1, 1] = 1.0
        return A

    def jac_x(y, x, t):
        B = np.zeros((x.shape[0], 3, 3))
        B[:, 0, 1] = -x[:, 2]
        B[:, 0, 2] = -x[:, 1]
        B[:, 1, 0] = np.cos(x[:, 0])
        B[:, 2, 0] = -x[:, 1]
        B[:, 2, 1] = -x[:, 0]
        B[:, 2, 2] = 1.0 + 0.3 * x[:, 2] ** 2
        return B

    xa, _ = evaluate_many(exact, [0.0])
    xa = xa[0]

    def boundary(u, v):
        return np.array([u[0] - xa[0], u[1] - xa[1]])

    def boundary_jac(u, v):
        gu = np.zeros((2, 3))
        gu[0, 0] = gu[1, 1] = 1.0
        return gu, np.zeros((2, 3))

    def reference(t):
        return evaluate_many(exact, t)

    sys = DAESystem(m=3, k=2, l=2, mu=1, interval=(0.0, 1.0), residual=residual, boundary=boundary,
                    jac_y=jac_y, jac_x=jac_x, boundary_jac=boundary_jac, reference_solution=reference,
                    vectorized=True, name="manufactured")
    return BenchmarkProblem(sys, "manufactured", (0.0, 1.0), xa,
                            notes=f"exact solution in X_pi for N={N}, n={n}", exact_element=exact)


def get_problem(spec: str, **kwargs) -> BenchmarkProblem:
    """Resolve CLI problem names: ``pendulum``, ``campbell-moore``, ``chain:MU``, ``manufactured``."""
    if spec == "pendulum":
        return pendulum()
    if spec in ("campbell-moore", "campbell_moore"):
        return campbell_moore()
    if spec.startswith("chain:"):
        try:
            mu = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ArgumentError(f"bad chain index in {spec!r}") from exc
        return linear_chain(mu, **{k: v for k, v in kwargs.items() if k in ("lam", "solution", "degree", "seed")})
    if spec == "manufactured":
        return manufactured_in_space(**{k: v for k, v in kwargs.items() if k in ("N", "n", "seed")})
    raise ArgumentError(f"unknown problem {spec!r}")

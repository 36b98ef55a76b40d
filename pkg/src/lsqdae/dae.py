"""DAE problem abstraction ``f((Dx)'(t), x(t), t) = 0``, ``g(x(a), x(b)) = 0``.

``D = [I 0]`` selects the first ``k`` of the ``m`` components.  Functions on a
:class:`DAESystem` are either pointwise (``y`` of shape ``(k,)``, ``x`` of shape
``(m,)``, scalar ``t``) or, with ``vectorized=True``, batched over a leading
axis of ``P`` points (``y`` ``(P, k)``, ``x`` ``(P, m)``, ``t`` ``(P,)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, DomainError

FD_STEP = 1e-6


@dataclass(frozen=True)
class DAESystem:
    m: int
    k: int
    l: int
    mu: int
    interval: tuple[float, float]
    residual: Callable
    boundary: Callable
    jac_y: Optional[Callable] = None
    jac_x: Optional[Callable] = None
    boundary_jac: Optional[Callable] = None
    reference_solution: Optional[Callable] = None
    vectorized: bool = False
    name: str = "dae"

    def __post_init__(self):
        if not (0 <= self.l <= self.k <= self.m) or self.k < 1:
            raise ArgumentError(f"need 0 <= l <= k <= m and k >= 1, got l={self.l}, k={self.k}, m={self.m}")
        if self.mu < 1:
            raise ArgumentError("index mu must be positive")
        a, b = self.interval
        if not a < b:
            raise ArgumentError("interval must satisfy a < b")

    @property
    def a(self) -> float:
        return float(self.interval[0])

    @property
    def b(self) -> float:
        return float(self.interval[1])

    # -- batched evaluation, used by assembly -----------------------------

    def residual_batch(self, y, x, t):
        return self._batched(self.residual, y, x, t)

    def jacobians_batch(self, y, x, t):
        """Return ``(A, B)`` of shapes ``(P, m, k)`` and ``(P, m, m)``."""
        if self.jac_y is None or self.jac_x is None:
            A, B = fd_jacobians(self, y, x, t)
        if self.jac_y is not None:
            A = self._batched(self.jac_y, y, x, t)
        if self.jac_x is not None:
            B = self._batched(self.jac_x, y, x, t)
        return A, B

    def _batched(self, fn, y, x, t):
        if self.vectorized:
            return np.asarray(fn(y, x, t), dtype=float)
        return np.array([fn(yi, xi, ti) for yi, xi, ti in zip(y, x, t)], dtype=float)

    def boundary_jacobians(self, u, v):
        if self.boundary_jac is not None:
            gu, gv = self.boundary_jac(u, v)
            return np.atleast_2d(np.asarray(gu, float)).reshape(self.l, self.m), \
                np.atleast_2d(np.asarray(gv, float)).reshape(self.l, self.m)
        return fd_boundary_jacobians(self, u, v)

    def reference_batch(self, t):
        """Evaluate the reference solution at an array of times."""
        if self.reference_solution is None:
            raise ArgumentError(f"problem {self.name!r} has no reference solution")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.vectorized:
            x, dx = self.reference_solution(t)
            return np.asarray(x, float).reshape(t.size, self.m), np.asarray(dx, float).reshape(t.size, self.k)
        pairs = [self.reference_solution(ti) for ti in t]
        return (np.array([p[0] for p in pairs], float).reshape(t.size, self.m),
                np.array([p[1] for p in pairs], float).reshape(t.size, self.k))


@dataclass(frozen=True)
class LinearizationPoint:
    t: float
    y: np.ndarray
    x: np.ndarray
    A: np.ndarray
    B: np.ndarray = field(repr=False)


def _as_batch(sys: DAESystem, y, x, t):
    y = np.asarray(y, float).reshape(1, sys.k)
    x = np.asarray(x, float).reshape(1, sys.m)
    t = np.asarray([float(t)])
    return y, x, t


def _check_point(sys, y, x):
    if np.shape(y) != (sys.k,) or np.shape(x) != (sys.m,):
        raise ArgumentError(f"expected y of shape ({sys.k},) and x of shape ({sys.m},)")


def evaluate_residual(sys: DAESystem, y, x, t) -> np.ndarray:
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    _check_point(sys, y, x)
    f = sys.residual_batch(*_as_batch(sys, y, x, t))[0]
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size:
        raise DomainError(f"non-finite residual at t={t}, component {bad[0]}", t=t, component=int(bad[0]))
    return f


def linearize_at(sys: DAESystem, y, x, t) -> LinearizationPoint:
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    _check_point(sys, y, x)
    A, B = sys.jacobians_batch(*_as_batch(sys, y, x, t))
    A, B = A[0], B[0]
    for name, mat in (("f_y", A), ("f_x", B)):
        bad = np.argwhere(~np.isfinite(mat))
        if bad.size:
            raise DomainError(f"non-finite {name} at t={t}", t=t, component=int(bad[0][0]))
    return LinearizationPoint(t=float(t), y=y, x=x, A=A, B=B)


def fd_jacobians(sys: DAESystem, y, x, t):
    """Central-difference ``(f_y, f_x)`` with step ``1e-6 * (1 + |value|)``.

    Accepts a batch ``y (P, k), x (P, m), t (P,)`` or a single point.
    """
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    if y.ndim == 1:
        A, B = fd_jacobians(sys, *_as_batch(sys, y, x, t))
        return A[0], B[0]
    P = y.shape[0]
    A = np.empty((P, sys.m, sys.k))
    B = np.empty((P, sys.m, sys.m))
    for i in range(sys.k):
        h = FD_STEP * (1.0 + np.abs(y[:, i]))
        yp, ym = y.copy(), y.copy()
        yp[:, i] += h
        ym[:, i] -= h
        A[:, :, i] = (sys.residual_batch(yp, x, t) - sys.residual_batch(ym, x, t)) / (2 * h[:, None])
    for i in range(sys.m):
        h = FD_STEP * (1.0 + np.abs(x[:, i]))
        xp, xm = x.copy(), x.copy()
        xp[:, i] += h
        xm[:, i] -= h
        B[:, :, i] = (sys.residual_batch(y, xp, t) - sys.residual_batch(y, xm, t)) / (2 * h[:, None])
    return A, B


def fd_boundary_jacobians(sys: DAESystem, u, v):
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    gu = np.empty((sys.l, sys.m))
    gv = np.empty((sys.l, sys.m))
    for i in range(sys.m):
        for arg, out in ((u, gu), (v, gv)):
            h = FD_STEP * (1.0 + abs(arg[i]))
            p, q = arg.copy(), arg.copy()
            p[i] += h
            q[i] -= h
            if arg is u:
                d = np.asarray(sys.boundary(p, v), float) - np.asarray(sys.boundary(q, v), float)
            else:
                d = np.asarray(sys.boundary(u, p), float) - np.asarray(sys.boundary(u, q), float)
            out[:, i] = d / (2 * h)
    return gu, gv


def _sample_points(sys, samples, rng, box):
    a, b = sys.interval
    t = rng.uniform(a, b, samples)
    if box is not None:
        lo_y, hi_y, lo_x, hi_x = (np.asarray(v, float) for v in box)
        y = rng.uniform(lo_y, hi_y, (samples, sys.k))
        x = rng.uniform(lo_x, hi_x, (samples, sys.m))
        return y, x, t
    if sys.reference_solution is None:
        raise ArgumentError("validation needs a reference solution or a sampling box")
    x, y = sys.reference_batch(t)
    x = x + 0.1 * rng.standard_normal(x.shape) * (1 + np.abs(x))
    y = y + 0.1 * rng.standard_normal(y.shape) * (1 + np.abs(y))
    return y, x, t


def validate_jacobians(sys: DAESystem, samples: int = 100, seed: int = 0, box=None) -> dict:
    """Compare analytic Jacobians with central differences at sampled points.

    Points are drawn around the reference solution, or uniformly from
    ``box = (y_lo, y_hi, x_lo, x_hi)``.  The returned ``deviation`` is the
    largest ``|analytic - fd| / (1 + |analytic|)`` (spectral norms) over all
    samples and over ``f_y``, ``f_x``, ``g_u``, ``g_v``.
    """
    rng = np.random.default_rng(seed)
    y, x, t = _sample_points(sys, samples, rng, box)
    A, B = sys.jacobians_batch(y, x, t)
    Afd, Bfd = fd_jacobians(sys, y, x, t)
    dev = {"jac_y": 0.0, "jac_x": 0.0, "boundary_jac": 0.0}
    for p in range(samples):
        dev["jac_y"] = max(dev["jac_y"], np.linalg.norm(A[p] - Afd[p], 2) / (1 + np.linalg.norm(A[p], 2)))
        dev["jac_x"] = max(dev["jac_x"], np.linalg.norm(B[p] - Bfd[p], 2) / (1 + np.linalg.norm(B[p], 2)))
    if sys.l > 0:
        for p in range(min(samples, 20)):
            u, v = x[p], x[(p + 1) % samples]
            gu, gv = sys.boundary_jacobians(u, v)
            fu, fv = fd_boundary_jacobians(sys, u, v)
            for an, fd in ((gu, fu), (gv, fv)):
                dev["boundary_jac"] = max(dev["boundary_jac"], np.linalg.norm(an - fd, 2) / (1 + np.linalg.norm(an, 2)))
    worst = max(dev.values())
    return {"deviation": worst, "parts": dev, "samples": samples, "seed": seed}


def check_boundary_independence(sys: DAESystem, samples: int = 20, seed: int = 0) -> float:
    """Largest ``|g(u, v) - g(Pu, Pv)|`` where ``P`` zeroes the algebraic components."""
    if sys.l == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        u = rng.standard_normal(sys.m)
        v = rng.standard_normal(sys.m)
        if sys.reference_solution is not None:
            (ua, vb), _ = sys.reference_batch([sys.a, sys.b])
            u, v = u + ua, v + vb
        pu, pv = u.copy(), v.copy()
        pu[sys.k:] = 0.0
        pv[sys.k:] = 0.0
        d = np.asarray(sys.boundary(u, v), float) - np.asarray(sys.boundary(pu, pv), float)
        worst = max(worst, float(np.max(np.abs(d), initial=0.0)))
    return worst

"""Partitions of ``[a, b]`` and the piecewise-polynomial ansatz space.

Elements of the space are stored as nodal values.  Differential components
(the first ``k``) are degree-``N`` polynomials on each subinterval with nodes
at the Gauss-Lobatto points, so the endpoint value is shared with the next
subinterval and continuity holds by construction.  Algebraic components are
degree ``N - 1`` with nodes at the ``N`` Gauss-Legendre points and may jump at
breakpoints.

Coefficient layout (``dim = n*N*m + k``).  Block ``j`` has width ``N*m``::

    [ c_j (k) | diff. interior nodes 1..N-1 (k*(N-1)) | alg. nodes (N*(m-k)) ]

where ``c_j`` are the differential values at ``t_j``; interior and algebraic
values run component-major, node-minor.  The trailing ``k`` entries hold
``c_n``, the differential values at ``b``.  Interval ``j`` therefore touches
the contiguous window ``[j*N*m, (j+1)*N*m + k)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DomainError

NEST_TOL = 1e-12


# -- reference-interval polynomials ------------------------------------------

def gauss_nodes(p: int):
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(p)
    return 0.5 * (x + 1.0), 0.5 * w


def lobatto_nodes(p: int) -> np.ndarray:
    """``p + 1`` Gauss-Lobatto nodes on [0, 1], endpoints included."""
    if p < 1:
        raise ArgumentError("Lobatto rule needs p >= 1")
    inner = np.polynomial.legendre.Legendre.basis(p).deriv().roots() if p > 1 else np.array([])
    x = np.concatenate(([-1.0], np.sort(inner.real), [1.0]))
    return 0.5 * (x + 1.0)


def barycentric_weights(nodes):
    nodes = np.asarray(nodes, float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / diff.prod(axis=1)


def lagrange_matrix(nodes, points) -> np.ndarray:
    """``L[i, j] = l_j(points[i])`` for the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, float)
    points = np.atleast_1d(np.asarray(points, float))
    p = nodes.size
    L = np.ones((points.size, p))
    for j in range(p):
        for q in range(p):
            if q != j:
                L[:, j] *= (points - nodes[q]) / (nodes[j] - nodes[q])
    return L


def differentiation_matrix(nodes) -> np.ndarray:
    """``D[i, j] = l_j'(nodes[i])``."""
    nodes = np.asarray(nodes, float)
    w = barycentric_weights(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


# -- partitions ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ArgumentError("a partition needs at least two breakpoints")
        if not np.all(np.diff(bp) > 0):
            raise ArgumentError("breakpoints must be strictly increasing")
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    @property
    def n(self) -> int:
        return self.breakpoints.size - 1

    @property
    def a(self) -> float:
        return float(self.breakpoints[0])

    @property
    def b(self) -> float:
        return float(self.breakpoints[-1])

    @cached_property
    def h(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def h_max(self) -> float:
        return float(self.h.max())

    @property
    def h_min(self) -> float:
        return float(self.h.min())

    @property
    def ratio_bound(self) -> float:
        return self.h_max / self.h_min

    def locate(self, t) -> np.ndarray:
        """Interval index for each ``t``; right-continuous, ``b`` goes to the last interval."""
        t = np.asarray(t, float)
        j = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(j, 0, self.n - 1)

    def is_refined_by(self, other: "Partition") -> bool:
        fine = other.breakpoints
        scale = NEST_TOL * (self.b - self.a)
        if abs(fine[0] - self.a) > scale or abs(fine[-1] - self.b) > scale:
            return False
        idx = np.clip(np.searchsorted(fine, self.breakpoints), 0, fine.size - 1)
        lo = np.clip(idx - 1, 0, fine.size - 1)
        dist = np.minimum(np.abs(fine[idx] - self.breakpoints), np.abs(fine[lo] - self.breakpoints))
        return bool(np.all(dist <= scale))

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.breakpoints, other.breakpoints)

    def __hash__(self):
        return hash(self.breakpoints.tobytes())


def make_uniform_partition(a: float, b: float, n: int) -> Partition:
    if n < 1:
        raise ArgumentError("number of subintervals must be positive")
    if not a < b:
        raise ArgumentError("need a < b")
    bp = a + (b - a) * np.arange(n + 1) / n
    bp[-1] = b
    return Partition(bp)


def refine_nested(p: Partition, q_inverse: int) -> Partition:
    """Split every subinterval into ``q_inverse`` equal parts."""
    if int(q_inverse) != q_inverse or q_inverse < 2:
        raise ArgumentError("q_inverse must be an integer >= 2")
    q_inverse = int(q_inverse)
    frac = np.arange(q_inverse) / q_inverse
    bp = (p.breakpoints[:-1, None] + p.h[:, None] * frac[None, :]).ravel()
    return Partition(np.append(bp, p.b))


# -- ansatz space ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AnsatzSpace:
    partition: Partition
    N: int
    m: int
    k: int

    def __post_init__(self):
        if self.N < 1:
            raise ArgumentError("polynomial degree N must be >= 1")
        if not 1 <= self.k <= self.m:
            raise ArgumentError("need 1 <= k <= m")

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def dim(self) -> int:
        return self.n * self.N * self.m + self.k

    @property
    def block(self) -> int:
        return self.N * self.m

    @property
    def window(self) -> int:
        """Number of coefficients touched by one subinterval."""
        return self.N * self.m + self.k

    @cached_property
    def diff_nodes(self) -> np.ndarray:
        return lobatto_nodes(self.N)

    @cached_property
    def alg_nodes(self) -> np.ndarray:
        return gauss_nodes(self.N)[0]

    @cached_property
    def diff_dmat(self) -> np.ndarray:
        return differentiation_matrix(self.diff_nodes)

    @cached_property
    def local_diff_index(self) -> np.ndarray:
        """Window-local column of differential component ``kappa`` at node ``p``: shape ``(N+1, k)``."""
        N, k = self.N, self.k
        idx = np.empty((N + 1, k), dtype=int)
        idx[0] = np.arange(k)
        for p in range(1, N):
            idx[p] = k + np.arange(k) * (N - 1) + (p - 1)
        idx[N] = N * self.m + np.arange(k)
        return idx

    @cached_property
    def local_alg_index(self) -> np.ndarray:
        """Window-local column of algebraic component ``k + kappa`` at node ``p``: shape ``(N, m-k)``."""
        N, k = self.N, self.k
        return k * N + np.arange(self.m - k)[None, :] * N + np.arange(N)[:, None]

    @cached_property
    def diff_index(self) -> np.ndarray:
        """Global coefficient index, shape ``(n, N+1, k)``."""
        return self.local_diff_index[None] + self.block * np.arange(self.n)[:, None, None]

    @cached_property
    def alg_index(self) -> np.ndarray:
        """Global coefficient index, shape ``(n, N, m-k)``."""
        return self.local_alg_index[None] + self.block * np.arange(self.n)[:, None, None]

    def same_shape(self, other: "AnsatzSpace") -> bool:
        return (self.N, self.m, self.k) == (other.N, other.m, other.k)

    def __eq__(self, other):
        return isinstance(other, AnsatzSpace) and self.same_shape(other) and self.partition == other.partition

    def __hash__(self):
        return hash((self.N, self.m, self.k, self.partition))

    # -- local evaluation ----------------------------------------------------

    def local_values(self, coeffs, tau, intervals=None, derivative=True):
        """Values on every (or the given) subinterval at local abscissae ``tau``.

        Returns ``x`` of shape ``(n_sel, P, m)`` and, if requested, ``(Dx)'`` of
        shape ``(n_sel, P, k)``.
        """
        coeffs = np.asarray(coeffs, float)
        tau = np.atleast_1d(np.asarray(tau, float))
        sel = np.arange(self.n) if intervals is None else np.asarray(intervals)
        cd = coeffs[self.diff_index[sel]]                      # (s, N+1, k)
        ca = coeffs[self.alg_index[sel]]                       # (s, N, m-k)
        Ld = lagrange_matrix(self.diff_nodes, tau)             # (P, N+1)
        La = lagrange_matrix(self.alg_nodes, tau)              # (P, N)
        x = np.concatenate([Ld @ cd, La @ ca], axis=2)
        if not derivative:
            return x
        dx = (Ld @ self.diff_dmat) @ cd / self.partition.h[sel][:, None, None]
        return x, dx

    def nodal_times(self):
        """Global interpolation abscissae: ``(n, N+1)`` differential and ``(n, N)`` algebraic."""
        t0 = self.partition.breakpoints[:-1, None]
        h = self.partition.h[:, None]
        return t0 + h * self.diff_nodes[None, :], t0 + h * self.alg_nodes[None, :]

    def from_nodal(self, diff_vals, alg_vals) -> np.ndarray:
        """Pack nodal values ``(n, N+1, k)`` / ``(n, N, m-k)`` into a coefficient vector.

        Shared endpoint values are taken from the left end of the next interval.
        """
        c = np.empty(self.dim)
        c[self.diff_index[:, :-1].ravel()] = diff_vals[:, :-1].ravel()
        c[self.diff_index[-1, -1]] = diff_vals[-1, -1]
        c[self.alg_index.ravel()] = alg_vals.ravel()
        return c


@dataclass(frozen=True, eq=False)
class AnsatzElement:
    space: AnsatzSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.space.dim,):
            raise ArgumentError(f"expected {self.space.dim} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, t):
        return evaluate(self, t)

    def with_coeffs(self, coeffs) -> "AnsatzElement":
        return AnsatzElement(self.space, coeffs)

    def node_value(self, j: int, comp: int, node: int) -> float:
        return float(self.coeffs[_node_index(self.space, j, comp, node)])

    def set_node_value(self, j: int, comp: int, node: int, value: float) -> "AnsatzElement":
        c = self.coeffs.copy()
        c[_node_index(self.space, j, comp, node)] = value
        return AnsatzElement(self.space, c)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        p = self.space.partition
        return {"a": p.a, "b": p.b, "breakpoints": p.breakpoints.tolist(), "N": self.space.N,
                "m": self.space.m, "k": self.space.k, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzElement":
        part = Partition(np.asarray(d["breakpoints"], float))
        if abs(part.a - d["a"]) > 0 or abs(part.b - d["b"]) > 0:
            raise ArgumentError("breakpoints do not match the stored interval")
        return cls(AnsatzSpace(part, int(d["N"]), int(d["m"]), int(d["k"])), np.asarray(d["coeffs"], float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "AnsatzElement":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _node_index(space: AnsatzSpace, j, comp, node):
    if comp < space.k:
        return space.diff_index[j, node, comp]
    return space.alg_index[j, node, comp - space.k]


def zero_element(space: AnsatzSpace) -> AnsatzElement:
    return AnsatzElement(space, np.zeros(space.dim))


def evaluate_many(elem: AnsatzElement, t):
    """Vectorized :func:`evaluate`: arrays ``(P, m)`` and ``(P, k)``."""
    space = elem.space
    part = space.partition
    t = np.atleast_1d(np.asarray(t, float))
    span = part.b - part.a
    if np.any(t < part.a - NEST_TOL * span) or np.any(t > part.b + NEST_TOL * span):
        raise ArgumentError(f"t outside [{part.a}, {part.b}]")
    j = part.locate(t)
    tau = (t - part.breakpoints[j]) / part.h[j]
    c = elem.coeffs
    cd = c[space.diff_index[j]]                                # (P, N+1, k)
    ca = c[space.alg_index[j]]                                 # (P, N, m-k)
    Ld = lagrange_matrix(space.diff_nodes, tau)                # (P, N+1)
    La = lagrange_matrix(space.alg_nodes, tau)
    xd = np.einsum("pi,pik->pk", Ld, cd)
    xa = np.einsum("pi,pik->pk", La, ca)
    dd = np.einsum("pi,pik->pk", Ld @ space.diff_dmat, cd) / part.h[j][:, None]
    return np.concatenate([xd, xa], axis=1), dd


def evaluate(elem: AnsatzElement, t: float):
    """``(x(t), (Dx)'(t))``; at interior breakpoints the right interval is used."""
    x, dx = evaluate_many(elem, [t])
    return x[0], dx[0]


def interpolate(space: AnsatzSpace, fn, vectorized: bool = False) -> AnsatzElement:
    """Nodal interpolant of ``fn: t -> R^m`` (or ``t -> (x, dx)``).

    Differential components are sampled at Lobatto images, algebraic ones at
    Gauss images, so one-sided limits of ``fn`` at breakpoints are never needed
    for the algebraic part.
    """
    td, ta = space.nodal_times()
    k = space.k

    def sample(times):
        flat = times.ravel()
        if vectorized:
            out = fn(flat)
            vals = out[0] if isinstance(out, tuple) else out
        else:
            rows = []
            for ti in flat:
                out = fn(ti)
                rows.append(out[0] if isinstance(out, tuple) else out)
            vals = rows
        vals = np.asarray(vals, float).reshape(times.shape + (space.m,))
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise DomainError("non-finite interpolation sample", t=float(times[tuple(bad[:-1])]),
                              component=int(bad[-1]))
        return vals

    dvals = sample(td)[..., :k]
    avals = sample(ta)[..., k:] if space.m > k else np.zeros(ta.shape + (0,))
    return AnsatzElement(space, space.from_nodal(dvals, avals))


def prolongate(elem: AnsatzElement, fine: AnsatzSpace) -> AnsatzElement:
    """Exact re-expansion of ``elem`` on a refined partition."""
    coarse = elem.space
    if not coarse.same_shape(fine):
        raise ArgumentError("prolongation needs equal N, m, k")
    if not coarse.partition.is_refined_by(fine.partition):
        raise ArgumentError("fine partition does not refine the coarse one")
    cp = coarse.partition
    fp = fine.partition
    mid = 0.5 * (fp.breakpoints[:-1] + fp.breakpoints[1:])
    owner = cp.locate(mid)
    td, ta = fine.nodal_times()
    c = elem.coeffs

    def values_on_owner(times, nodes, index):
        tau = (times - cp.breakpoints[owner][:, None]) / cp.h[owner][:, None]
        L = lagrange_matrix(nodes, tau.ravel()).reshape(tau.shape + (nodes.size,))
        return np.einsum("fpq,fqc->fpc", L, c[index[owner]])

    dvals = values_on_owner(td, coarse.diff_nodes, coarse.diff_index)
    avals = values_on_owner(ta, coarse.alg_nodes, coarse.alg_index)
    return AnsatzElement(fine, fine.from_nodal(dvals, avals))

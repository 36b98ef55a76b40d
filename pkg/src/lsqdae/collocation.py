"""Collocation nodes, the Gram matrix of the restriction operator, and assembly
of the weighted discrete residual and its Jacobian.

Rows are ordered interval-major, node-minor, component-innermost, followed by
the ``l`` boundary rows.  The per-interval block of the residual is
``C @ (sqrt(h_j / M) * F_j)`` where ``F_j`` is the ``(M, m)`` array of DAE
residuals at the collocation points and ``C`` the upper Cholesky factor of the
Gram matrix, so ``|r|**2 = sum_j W_j^T (L kron I_m) W_j + bc_weight |g|**2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse

from .dae import DAESystem
from .errors import ArgumentError, DomainError
from .mesh import AnsatzElement, AnsatzSpace, gauss_nodes, lagrange_matrix


class NodeFamily(str, Enum):
    UNIFORM = "uniform_interior"
    GAUSS = "gauss_legendre"

    @classmethod
    def parse(cls, value) -> "NodeFamily":
        if isinstance(value, cls):
            return value
        aliases = {"uniform": cls.UNIFORM, "gauss": cls.GAUSS}
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True, eq=False)
class CollocationScheme:
    M: int
    node_family: NodeFamily
    tau: np.ndarray
    gram: np.ndarray
    gram_chol: np.ndarray
    bc_weight: float = 1.0

    @property
    def short_name(self) -> str:
        return "gauss" if self.node_family is NodeFamily.GAUSS else "uniform"

    def with_bc_weight(self, bc_weight: float) -> "CollocationScheme":
        if not bc_weight > 0:
            raise ArgumentError("bc_weight must be positive")
        return CollocationScheme(self.M, self.node_family, self.tau, self.gram, self.gram_chol, float(bc_weight))


def collocation_nodes(M: int, family) -> np.ndarray:
    family = NodeFamily.parse(family)
    if family is NodeFamily.UNIFORM:
        return np.arange(1, M + 1) / (M + 1)
    return gauss_nodes(M)[0]


def gram_matrix(tau) -> np.ndarray:
    """``G[i, i'] = M * int_0^1 l_i l_i'`` for the Lagrange basis on ``tau``."""
    tau = np.asarray(tau, float)
    M = tau.size
    xq, wq = gauss_nodes(M)
    L = lagrange_matrix(tau, xq)
    G = M * (L.T * wq) @ L
    return 0.5 * (G + G.T)


def make_scheme(M: int, family="uniform_interior", N: int = 1, bc_weight: float = 1.0) -> CollocationScheme:
    if N < 1:
        raise ArgumentError("N must be >= 1")
    if M <= N:
        raise ArgumentError("least-squares setting requires M>N")
    if not bc_weight > 0:
        raise ArgumentError("bc_weight must be positive")
    family = NodeFamily.parse(family)
    tau = collocation_nodes(M, family)
    gram = gram_matrix(tau)
    chol = scipy.linalg.cholesky(gram, lower=False)
    for arr in (tau, gram, chol):
        arr.setflags(write=False)
    return CollocationScheme(M, family, tau, gram, chol, float(bc_weight))


@dataclass(frozen=True, eq=False)
class BlockJacobian:
    """Almost-block-diagonal Jacobian.

    ``blocks[j]`` holds the ``M*m`` rows of interval ``j`` restricted to the
    coefficient window starting at column ``j * N * m``; ``bc_a`` / ``bc_b``
    are the boundary rows restricted to the first / last window.
    """

    blocks: np.ndarray
    bc_a: np.ndarray
    bc_b: np.ndarray
    space: AnsatzSpace

    @property
    def shape(self):
        n, rows, _ = self.blocks.shape
        return (n * rows + self.bc_a.shape[0], self.space.dim)

    def _col_offsets(self):
        return self.space.block * np.arange(self.space.n)

    def tosparse(self) -> scipy.sparse.csr_matrix:
        n, rows, w = self.blocks.shape
        off = self._col_offsets()
        r_idx = (np.arange(n)[:, None, None] * rows + np.arange(rows)[None, :, None]) + np.zeros((1, 1, w), int)
        c_idx = off[:, None, None] + np.arange(w)[None, None, :] + np.zeros((1, rows, 1), int)
        l = self.bc_a.shape[0]
        base = n * rows
        br = base + np.repeat(np.arange(l), w)
        bc_rows = np.concatenate([br, br])
        bc_cols = np.concatenate([np.tile(np.arange(w), l), np.tile(off[-1] + np.arange(w), l)])
        bc_vals = np.concatenate([self.bc_a.ravel(), self.bc_b.ravel()])
        data = np.concatenate([self.blocks.ravel(), bc_vals])
        rr = np.concatenate([r_idx.ravel(), bc_rows])
        cc = np.concatenate([c_idx.ravel(), bc_cols])
        return scipy.sparse.csr_matrix((data, (rr, cc)), shape=self.shape)

    def toarray(self) -> np.ndarray:
        return self.tosparse().toarray()

    def matvec(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        sp = self.space
        win = z[self._col_offsets()[:, None] + np.arange(sp.window)[None, :]]
        body = np.einsum("nrw,nw->nr", self.blocks, win).ravel()
        bc = self.bc_a @ win[0] + self.bc_b @ win[-1]
        return np.concatenate([body, bc])

    def rmatvec(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        sp = self.space
        n, rows, w = self.blocks.shape
        body = r[: n * rows].reshape(n, rows)
        bc = r[n * rows:]
        out = np.zeros(sp.dim)
        contrib = np.einsum("nrw,nr->nw", self.blocks, body)
        cols = self._col_offsets()[:, None] + np.arange(w)[None, :]
        np.add.at(out, cols, contrib)
        out[cols[0]] += self.bc_a.T @ bc
        out[cols[-1]] += self.bc_b.T @ bc
        return out


@dataclass(frozen=True, eq=False)
class DiscreteResidual:
    r: np.ndarray
    J: BlockJacobian | None
    psi: float
    colloc_values: np.ndarray
    boundary_values: np.ndarray


def collocation_times(space: AnsatzSpace, scheme: CollocationScheme) -> np.ndarray:
    """``t_ji = t_{j-1} + tau_i h_j`` as an ``(n, M)`` array."""
    part = space.partition
    return part.breakpoints[:-1, None] + part.h[:, None] * scheme.tau[None, :]


def _check_shapes(sys: DAESystem, elem: AnsatzElement, scheme: CollocationScheme):
    sp = elem.space
    if (sp.m, sp.k) != (sys.m, sys.k):
        raise ArgumentError(f"ansatz space has (m, k) = ({sp.m}, {sp.k}), system has ({sys.m}, {sys.k})")
    if scheme.M <= sp.N:
        raise ArgumentError("least-squares setting requires M>N")


def _raise_located(exc_msg, mask, times, component_axis=True):
    idx = np.argwhere(mask)[0]
    j, i = int(idx[0]), int(idx[1])
    comp = int(idx[2]) if component_axis and idx.size > 2 else None
    raise DomainError(f"{exc_msg} in interval {j} at node {i} (t={times[j, i]:.6g})",
                      t=float(times[j, i]), component=comp, interval=j)


def boundary_values(elem: AnsatzElement):
    """``x(a)`` from the first and ``x(b)`` from the last subinterval."""
    sp = elem.space
    first = sp.local_values(elem.coeffs, [0.0], intervals=[0], derivative=False)[0, 0]
    last = sp.local_values(elem.coeffs, [1.0], intervals=[sp.n - 1], derivative=False)[0, 0]
    return first, last


def assemble(sys: DAESystem, elem: AnsatzElement, scheme: CollocationScheme,
             with_jacobian: bool = True) -> DiscreteResidual:
    _check_shapes(sys, elem, scheme)
    sp = elem.space
    n, M, m, k, N = sp.n, scheme.M, sp.m, sp.k, sp.N
    part = sp.partition
    times = collocation_times(sp, scheme)
    X, Y = sp.local_values(elem.coeffs, scheme.tau)               # (n, M, m), (n, M, k)
    P = n * M
    F = sys.residual_batch(Y.reshape(P, k), X.reshape(P, m), times.ravel()).reshape(n, M, m)
    if not np.all(np.isfinite(F)):
        _raise_located("non-finite residual", ~np.isfinite(F), times)
    scale = np.sqrt(part.h / M)
    C = scheme.gram_chol
    body = np.einsum("ab,nbc->nac", C, F * scale[:, None, None])
    u, v = boundary_values(elem)
    g = np.atleast_1d(np.asarray(sys.boundary(u, v), float)).reshape(sys.l)
    if not np.all(np.isfinite(g)):
        raise DomainError("non-finite boundary residual", t=sys.a)
    sw = np.sqrt(scheme.bc_weight)
    r = np.concatenate([body.ravel(), sw * g])
    psi = float(r @ r)
    if not with_jacobian:
        return DiscreteResidual(r, None, psi, F, g)

    A, B = sys.jacobians_batch(Y.reshape(P, k), X.reshape(P, m), times.ravel())
    A = A.reshape(n, M, m, k)
    B = B.reshape(n, M, m, m)
    for mat in (A, B):
        bad = ~np.isfinite(mat)
        if bad.any():
            _raise_located("non-finite Jacobian", bad.any(axis=-1), times)
    Ld = lagrange_matrix(sp.diff_nodes, scheme.tau)               # (M, N+1)
    Dd = Ld @ sp.diff_dmat
    La = lagrange_matrix(sp.alg_nodes, scheme.tau)                # (M, N)
    W = sp.window
    G = np.zeros((n, M, m, W))
    # d F_i / d (diff comp kappa at node p) = A[:, kappa] * l_p'(tau_i) / h + B[:, kappa] * l_p(tau_i)
    Td = (np.einsum("nick,ip->nicpk", A, Dd) / part.h[:, None, None, None, None]
          + np.einsum("nick,ip->nicpk", B[..., :k], Ld))
    G[..., sp.local_diff_index.ravel()] = Td.reshape(n, M, m, (N + 1) * k)
    if m > k:
        Ta = np.einsum("nick,ip->nicpk", B[..., k:], La)
        G[..., sp.local_alg_index.ravel()] = Ta.reshape(n, M, m, N * (m - k))
    G *= scale[:, None, None, None]
    blocks = np.einsum("ab,nbcw->nacw", C, G).reshape(n, M * m, W)

    gu, gv = sys.boundary_jacobians(u, v)
    la0 = lagrange_matrix(sp.alg_nodes, [0.0])[0]
    la1 = lagrange_matrix(sp.alg_nodes, [1.0])[0]
    bc_a = np.zeros((sys.l, W))
    bc_b = np.zeros((sys.l, W))
    bc_a[:, sp.local_diff_index[0]] = gu[:, :k]
    bc_b[:, sp.local_diff_index[N]] = gv[:, :k]
    if m > k:
        bc_a[:, sp.local_alg_index.ravel()] = np.einsum("lc,p->lpc", gu[:, k:], la0).reshape(sys.l, -1)
        bc_b[:, sp.local_alg_index.ravel()] = np.einsum("lc,p->lpc", gv[:, k:], la1).reshape(sys.l, -1)
    J = BlockJacobian(blocks, sw * bc_a, sw * bc_b, sp)
    return DiscreteResidual(r, J, psi, F, g)


def objective(sys: DAESystem, elem: AnsatzElement, scheme: CollocationScheme) -> float:
    return assemble(sys, elem, scheme, with_jacobian=False).psi


def direct_psi(sys: DAESystem, elem: AnsatzElement, scheme: CollocationScheme) -> float:
    """``sum_j W_j^T (L kron I) W_j + bc_weight |g|^2`` without the Cholesky factor."""
    _check_shapes(sys, elem, scheme)
    sp = elem.space
    times = collocation_times(sp, scheme)
    total = 0.0
    for j in range(sp.n):
        x, dx = sp.local_values(elem.coeffs, scheme.tau, intervals=[j])
        w = np.array([sys.residual_batch(dx[0, i:i + 1], x[0, i:i + 1], times[j, i:i + 1])[0]
                      for i in range(scheme.M)])
        Wj = np.sqrt(sp.partition.h[j] / scheme.M) * w.ravel()
        total += Wj @ np.kron(scheme.gram, np.eye(sp.m)) @ Wj
    u, v = boundary_values(elem)
    g = np.asarray(sys.boundary(u, v), float)
    return float(total + scheme.bc_weight * g @ g)


def dump_system(path, res: DiscreteResidual) -> tuple[str, str]:
    """Write ``J`` and ``r`` as Matrix-Market files; returns the two paths."""
    path = str(path)
    stem = path[:-4] if path.endswith(".mtx") else path
    jpath, rpath = stem + ".mtx", stem + "_rhs.mtx"
    scipy.io.mmwrite(jpath, res.J.tosparse())
    scipy.io.mmwrite(rpath, res.r[:, None])
    return jpath, rpath

"""Linear least-squares engine for the Gauss-Newton subproblem ``min |J z + r|``.

Two routes share one result type:

* :func:`solve_lsq` -- dense column-pivoted QR with a minimum-norm SVD
  fallback when the numerical rank is deficient;
* :func:`solve_block_lsq` -- orthogonal block elimination on a
  :class:`~lsqdae.collocation.BlockJacobian`.  Interior unknowns are removed
  interval by interval, then the shared endpoint values are swept with the
  value at ``a`` carried along, leaving a small ``2k``-column problem together
  with the boundary rows.  Every step is a Householder QR, so the result is the
  least-squares solution of a column-permuted QR of ``J``; normal equations
  are never formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import ArgumentError, NumericalError

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class LsqSolution:
    z: np.ndarray
    residual_norm: float
    rank_estimate: int
    smallest_singular_value: Optional[float] = None
    condition_estimate: Optional[float] = None
    method: str = "dense-qr"


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite entries in least-squares data")


def solve_lsq(J, r, rank_tol: Optional[float] = None, diagnostics: bool = False) -> LsqSolution:
    """Minimize ``|J z + r|`` by column-pivoted QR.

    ``rank_tol`` is absolute on ``|R_ii|``; the default is
    ``max(rows, cols) * eps * |R_11|``.  When the estimated rank is below the
    column count the minimum-norm solution is returned.
    """
    J = np.asarray(J, float)
    r = np.asarray(r, float)
    rows, cols = J.shape
    if rows < cols:
        raise ArgumentError("solve_lsq expects rows >= cols")
    if r.shape != (rows,):
        raise ArgumentError("right-hand side length does not match J")
    _check_finite(J, r)
    Q, R, perm = scipy.linalg.qr(J, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if rank_tol is None:
        rank_tol = max(rows, cols) * EPS * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > rank_tol))
    if rank == cols:
        y = scipy.linalg.solve_triangular(R, -(Q.T @ r))
        z = np.empty(cols)
        z[perm] = y
        method = "dense-qr"
    else:
        z = scipy.linalg.lstsq(J, -r, cond=rank_tol / diag[0] if diag[0] > 0 else None)[0]
        method = "dense-svd"
    smin = cond = None
    if diagnostics:
        s = scipy.linalg.svd(J, compute_uv=False)
        smin = float(s[-1])
        cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    res = float(np.linalg.norm(J @ z + r))
    return LsqSolution(z, res, rank, smin, cond, method)


def smallest_singular_value(J) -> float:
    J = np.asarray(J, float)
    if J.shape[0] < J.shape[1]:
        raise ArgumentError("smallest_singular_value expects rows >= cols")
    _check_finite(J)
    return float(scipy.linalg.svd(J, compute_uv=False)[-1])


def perturbation_check(A, B) -> dict:
    """Weyl-type bound ``max_i |s_i(A) - s_i(B)| <= |A - B|_2``."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    if A.shape != B.shape:
        raise ArgumentError("perturbation_check needs equal shapes")
    _check_finite(A, B)
    sa = scipy.linalg.svd(A, compute_uv=False)
    sb = scipy.linalg.svd(B, compute_uv=False)
    dev = float(np.max(np.abs(sa - sb), initial=0.0))
    bound = float(np.linalg.norm(A - B, 2)) if A.size else 0.0
    return {"sv_deviation_max": dev, "bound": bound, "holds": dev <= bound + 1e-10}


def optimality_residual(J, r, z) -> tuple[float, float]:
    """``(|J^T (J z + r)|, |J^T r|)`` for either a dense or a block Jacobian."""
    if hasattr(J, "rmatvec"):
        return (float(np.linalg.norm(J.rmatvec(J.matvec(z) + r))), float(np.linalg.norm(J.rmatvec(r))))
    J = np.asarray(J)
    return float(np.linalg.norm(J.T @ (J @ z + r))), float(np.linalg.norm(J.T @ r))


# -- structured route --------------------------------------------------------

def block_structure_ok(J) -> bool:
    """Boundary rows must act only on the endpoint values ``c_0`` and ``c_n``."""
    sp = J.space
    k = sp.k
    a_rest = J.bc_a[:, k:]
    b_rest = J.bc_b.copy()
    b_rest[:, sp.N * sp.m:] = 0.0
    if sp.n == 1:
        # both windows coincide; the sum is what matters
        total = J.bc_a + J.bc_b
        mid = total[:, k:sp.N * sp.m]
        return not np.any(mid)
    return not (np.any(a_rest) or np.any(b_rest))


def _qr_apply(S, rhs, ncols):
    """Apply the Householder ``Q^T`` reducing the first ``ncols`` columns of ``S``."""
    Q, _ = np.linalg.qr(S[:, :ncols], mode="complete")
    return Q.T @ S, Q.T @ rhs


def solve_block_lsq(J, r, rank_tol: Optional[float] = None) -> LsqSolution:
    """Minimize ``|J z + r|`` for a :class:`BlockJacobian` ``J``.

    Falls back to :func:`solve_lsq` on the dense matrix when the boundary rows
    touch algebraic or interior unknowns or a pivot block is numerically
    singular.
    """
    r = np.asarray(r, float)
    sp = J.space
    n, rows, W = J.blocks.shape
    k = sp.k
    Nm = sp.N * sp.m
    p = Nm - k
    if rows < p:
        raise ArgumentError("each interval needs at least as many rows as interior unknowns")
    _check_finite(J.blocks, J.bc_a, J.bc_b, r)
    if not block_structure_ok(J):
        return _dense_fallback(J, r, rank_tol)

    scale = max(np.abs(J.blocks).max(initial=0.0), np.abs(J.bc_a).max(initial=0.0),
                np.abs(J.bc_b).max(initial=0.0), 1e-300)
    if rank_tol is None:
        rank_tol = max(J.shape) * EPS * scale
    b = -r[: n * rows].reshape(n, rows)
    bc_rhs = -r[n * rows:]

    # stage 1: eliminate interior unknowns per interval (batched)
    Acol = J.blocks[:, :, :k]
    Bint = J.blocks[:, :, k:Nm]
    Ccol = J.blocks[:, :, Nm:]
    if p > 0:
        Q, Rint = np.linalg.qr(Bint, mode="complete")     # Q (n, rows, rows), R (n, rows, p)
        Qt = np.swapaxes(Q, 1, 2)
        At = Qt @ Acol
        Ct = Qt @ Ccol
        bt = np.einsum("nij,nj->ni", Qt, b)
        Rint = Rint[:, :p, :]
        piv = np.abs(np.diagonal(Rint, axis1=1, axis2=2))
        if np.any(piv <= rank_tol):
            return _dense_fallback(J, r, rank_tol)
        E, F, beta = At[:, p:], Ct[:, p:], bt[:, p:]
    else:
        At, Ct, bt, Rint = Acol, Ccol, b, None
        E, F, beta = Acol, Ccol, b

    # stage 2: sweep over endpoint values c_1..c_{n-1}, carrying c_0
    # carry rows act on [c_cur | c_0]
    carry = np.concatenate([F[0], E[0]], axis=1)
    carry_rhs = beta[0].copy()
    eliminated = []
    for j in range(1, n):
        s_j = E[j].shape[0]
        top = np.concatenate([carry[:, :k], np.zeros((carry.shape[0], k)), carry[:, k:]], axis=1)
        new = np.concatenate([E[j], F[j], np.zeros((s_j, k))], axis=1)
        S = np.vstack([top, new])                           # columns [c_j | c_{j+1} | c_0]
        rhs = np.concatenate([carry_rhs, beta[j]])
        S, rhs = _qr_apply(S, rhs, k)
        d = np.abs(np.diag(S[:k, :k]))
        if np.any(d <= rank_tol):
            return _dense_fallback(J, r, rank_tol)
        eliminated.append((S[:k, :k], S[:k, k:2 * k], S[:k, 2 * k:], rhs[:k]))
        rest, rest_rhs = S[k:, k:], rhs[k:]
        if rest.shape[0] > 2 * k:
            rest, rest_rhs = _qr_apply(rest, rest_rhs, 2 * k)
            rest, rest_rhs = rest[:2 * k], rest_rhs[:2 * k]
        carry, carry_rhs = rest, rest_rhs

    # final small problem on [c_n | c_0] plus boundary rows
    Ga = J.bc_a[:, :k]
    Gb = J.bc_b[:, Nm:Nm + k]
    if n == 1:
        Gb = Gb + J.bc_a[:, Nm:Nm + k]
        Ga = Ga + J.bc_b[:, :k]
    final = np.vstack([carry, np.concatenate([Gb, Ga], axis=1)])
    final_rhs = np.concatenate([carry_rhs, bc_rhs])
    small = solve_lsq(final, -final_rhs, rank_tol=rank_tol) if final.shape[0] >= 2 * k else None
    if small is None:
        return _dense_fallback(J, r, rank_tol)
    cn, c0 = small.z[:k], small.z[k:]
    c = [None] * (n + 1)
    c[0], c[n] = c0, cn
    for j in range(n - 1, 0, -1):
        Rjj, X, Y, rh = eliminated[j - 1]
        c[j] = scipy.linalg.solve_triangular(Rjj, rh - X @ c[j + 1] - Y @ c0)
    z = np.empty(sp.dim)
    for j in range(n):
        z[j * Nm: j * Nm + k] = c[j]
    z[n * Nm:] = c[n]
    if p > 0:
        cj = np.stack(c[:-1])
        cj1 = np.stack(c[1:])
        rhs_int = (bt[:, :p] - np.einsum("nij,nj->ni", At[:, :p], cj)
                   - np.einsum("nij,nj->ni", Ct[:, :p], cj1))
        interior = np.stack([scipy.linalg.solve_triangular(Rint[j], rhs_int[j]) for j in range(n)])
        cols = (np.arange(n) * Nm)[:, None] + k + np.arange(p)[None, :]
        z[cols] = interior
    rank = sp.dim - (2 * k - small.rank_estimate)
    res = float(np.linalg.norm(J.matvec(z) + r))
    return LsqSolution(z, res, rank, method="block-qr")


def _dense_fallback(J, r, rank_tol):
    sol = solve_lsq(J.toarray(), r, rank_tol=rank_tol)
    return LsqSolution(sol.z, sol.residual_norm, sol.rank_estimate, method=sol.method + "-fallback")


def solve_subproblem(J, r, method: str = "auto", rank_tol: Optional[float] = None) -> LsqSolution:
    """Dispatch between the dense and the structured route."""
    if method == "dense" or not hasattr(J, "blocks"):
        dense = J.toarray() if hasattr(J, "toarray") else J
        return solve_lsq(dense, r, rank_tol=rank_tol)
    if method in ("auto", "block"):
        return solve_block_lsq(J, r, rank_tol=rank_tol)
    raise ArgumentError(f"unknown least-squares method {method!r}")

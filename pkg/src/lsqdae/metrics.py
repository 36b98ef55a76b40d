"""Error norms against reference solutions, convergence studies and order tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ArgumentError, NumericalError
from .mesh import AnsatzElement, AnsatzSpace, evaluate_many, gauss_nodes, lagrange_matrix


@dataclass(frozen=True)
class ErrorReport:
    l2: np.ndarray            # per component
    l2_derivative: np.ndarray  # per differential component, of (Dx)'
    max_norm: np.ndarray      # informational, sampled at the quadrature points

    @property
    def l2_combined(self) -> float:
        return float(np.sqrt(np.sum(self.l2 ** 2)))

    @property
    def h1d(self) -> float:
        return float(np.sqrt(np.sum(self.l2 ** 2) + np.sum(self.l2_derivative ** 2)))


def quadrature_points(space: AnsatzSpace, quad_points: int):
    xq, wq = gauss_nodes(quad_points)
    part = space.partition
    t = part.breakpoints[:-1, None] + part.h[:, None] * xq[None, :]
    w = part.h[:, None] * wq[None, :]
    return t.ravel(), w.ravel()


def error_norms(elem: AnsatzElement, reference, quad_points: Optional[int] = None) -> ErrorReport:
    """L2 and H1_D errors of ``elem`` against ``reference`` by composite Gauss quadrature.

    ``reference`` maps an array of times to ``(x*, (Dx*)')`` arrays (a
    :class:`~lsqdae.dae.DAESystem` is accepted and its reference used).
    """
    space = elem.space
    if quad_points is None:
        quad_points = 2 * space.N + 2
    if quad_points < 2 * space.N + 2:
        raise ArgumentError("quad_points must be at least 2N+2")
    ref = reference.reference_batch if hasattr(reference, "reference_batch") else reference
    t, w = quadrature_points(space, quad_points)
    x, dx = evaluate_many(elem, t)
    xs, dxs = ref(t)
    ex = x - np.asarray(xs, float).reshape(x.shape)
    ed = dx - np.asarray(dxs, float).reshape(dx.shape)
    if not (np.all(np.isfinite(ex)) and np.all(np.isfinite(ed))):
        raise NumericalError("non-finite values in error computation")
    l2 = np.sqrt(w @ ex ** 2)
    l2d = np.sqrt(w @ ed ** 2)
    mx = np.abs(ex).max(axis=0)
    return ErrorReport(l2, l2d, mx)


def estimate_orders(errors, ratio: float = 2.0):
    """``log_ratio(e_n / e_{ratio*n})`` between consecutive rows; ``None`` where undefined.

    ``errors`` is a sequence of rows (arrays of equal length) or a 1-D sequence.
    """
    e = np.asarray(errors, float)
    squeeze = e.ndim == 1
    if squeeze:
        e = e[:, None]
    out = []
    for prev, cur in zip(e[:-1], e[1:]):
        row = []
        for p, c in zip(prev, cur):
            if not (np.isfinite(p) and np.isfinite(c)) or p <= 0 or c <= 0:
                row.append(None)
            else:
                row.append(math.log(p / c) / math.log(ratio))
        out.append(row[0] if squeeze else row)
    return out


def format_order(value) -> str:
    return "-" if value is None else f"{value:.1f}"


# -- convergence studies -----------------------------------------------------

INIT_MODES = ("interpolate_reference", "zero", "file")


@dataclass
class StudyRow:
    row: int
    n: int
    N: int
    M: int
    nodes: str
    psi_final: float
    gn_iters: int
    errors: np.ndarray            # per-component L2
    h1d: float
    ok: bool = True
    termination: str = ""
    message: str = ""


@dataclass
class ConvergenceStudy:
    rows: list = field(default_factory=list)
    label: str = "row"            # "level" for multilevel studies
    problem: str = ""

    @property
    def m(self) -> int:
        return len(self.rows[0].errors) if self.rows else 0

    @property
    def failed(self) -> list:
        return [r for r in self.rows if not r.ok]

    def error_matrix(self, h1d: bool = True) -> np.ndarray:
        cols = [np.append(r.errors, r.h1d) if h1d else np.asarray(r.errors) for r in self.rows]
        return np.array(cols, float)

    def orders(self) -> list:
        """Per consecutive row pair, one order per error column (``h1d`` last)."""
        E = self.error_matrix()
        out = []
        for i in range(1, len(self.rows)):
            ratio = self.rows[i].n / self.rows[i - 1].n
            out.append(estimate_orders(E[i - 1:i + 1], ratio=ratio)[0])
        return out

    # -- serialization --
    def header(self, orders: bool = False) -> list:
        cols = [self.label, "n", "N", "M", "nodes", "psi_final", "gn_iters"]
        cols += [f"err_c{i + 1}" for i in range(self.m)] + ["err_h1d"]
        if orders:
            cols += [f"ord_c{i + 1}" for i in range(self.m)] + ["ord_h1d"]
        return cols

    def to_csv(self, orders: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header(orders))
        ords = [None] + self.orders() if orders else None
        for i, r in enumerate(self.rows):
            line = [r.row, r.n, r.N, r.M, r.nodes, f"{r.psi_final:.2e}", r.gn_iters]
            line += [f"{e:.2e}" for e in r.errors] + [f"{r.h1d:.2e}"]
            if orders:
                o = ords[i] or [None] * (self.m + 1)
                line += ["" if v is None else f"{v:.1f}" for v in o]
            w.writerow(line)
        return buf.getvalue()

    def to_markdown(self, names=None, orders: bool = True) -> str:
        names = list(names) if names is not None else [f"c{i + 1}" for i in range(self.m)]
        cols = ["n"] + names + ["H1_D"]
        lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for r in self.rows:
            lines.append("| " + " | ".join([str(r.n)] + [f"{e:.2e}" for e in r.errors] + [f"{r.h1d:.2e}"]) + " |")
        if orders and len(self.rows) > 1:
            lines += ["", "| n | " + " | ".join(names + ["H1_D"]) + " |", "|" + "---|" * len(cols)]
            for r, o in zip(self.rows[1:], self.orders()):
                lines.append("| " + " | ".join([str(r.n)] + [format_order(v) for v in o]) + " |")
        return "\n".join(lines) + "\n"


def study_from_csv(text: str) -> ConvergenceStudy:
    """Parse :meth:`ConvergenceStudy.to_csv` output (order columns are ignored)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    m = sum(1 for h in header if h.startswith("err_c"))
    study = ConvergenceStudy(label=header[0])
    for line in reader:
        if not line:
            continue
        errs = np.array([float(v) for v in line[7:7 + m]])
        h1d = float(line[7 + m])
        study.rows.append(StudyRow(int(line[0]), int(line[1]), int(line[2]), int(line[3]), line[4],
                                   float(line[5]), int(line[6]), errs, h1d,
                                   ok=bool(np.all(np.isfinite(errs)))))
    return study


def _failed_row(i, n, N, M, nodes, m, termination, message):
    return StudyRow(i, n, N, M, nodes, float("nan"), 0, np.full(m, np.nan), float("nan"),
                    ok=False, termination=termination, message=message)


def initial_element(space: AnsatzSpace, problem, init: str = "interpolate_reference",
                    init_file=None) -> AnsatzElement:
    from .mesh import interpolate, prolongate, zero_element

    sys = getattr(problem, "sys", problem)
    if init == "interpolate_reference":
        if sys.reference_solution is None:
            raise ArgumentError("problem has no reference solution to interpolate")
        return interpolate(space, lambda t: sys.reference_batch(t)[0], vectorized=True)
    if init == "zero":
        return zero_element(space)
    if init == "file":
        if init_file is None:
            raise ArgumentError("init='file' needs init_file")
        elem = AnsatzElement.load(init_file)
        if elem.space == space:
            return elem
        return prolongate(elem, space)
    raise ArgumentError(f"unknown init mode {init!r}; expected one of {INIT_MODES}")


def run_convergence_study(problem, N: int, M: int, node_family="uniform_interior", n_list=(10, 20, 40),
                          init: str = "interpolate_reference", multilevel: bool = False,
                          q_inverse: int = 2, gn_config=None, bc_weight: float = 1.0,
                          init_file=None) -> ConvergenceStudy:
    """Solve on each mesh of ``n_list`` and tabulate errors against the reference.

    Cold mode (default) starts every row independently; ``multilevel=True``
    starts from ``init`` on the first mesh only and warm-starts the rest, in
    which case ``n_list`` must be a geometric sequence with factor
    ``q_inverse``.
    """
    from .collocation import make_scheme
    from .gauss_newton import GNConfig, Termination, gn_solve
    from .mesh import make_uniform_partition
    from .problems import get_problem

    if isinstance(problem, str):
        problem = get_problem(problem)
    sys = problem.sys
    n_list = [int(n) for n in n_list]
    if not n_list or any(n < 1 for n in n_list):
        raise ArgumentError("n_list must contain positive integers")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ArgumentError("n_list must be strictly increasing")
    scheme = make_scheme(M, node_family, N=N, bc_weight=bc_weight)
    nodes = scheme.short_name
    cfg = gn_config or GNConfig()
    has_ref = sys.reference_solution is not None
    study = ConvergenceStudy(label="level" if multilevel else "row", problem=problem.name)

    if multilevel:
        from .multilevel import MultilevelConfig, multilevel_solve
        for a, b in zip(n_list, n_list[1:]):
            if b != a * q_inverse:
                raise ArgumentError("multilevel n_list must grow by the factor q_inverse")
        space0 = AnsatzSpace(make_uniform_partition(sys.a, sys.b, n_list[0]), N, sys.m, sys.k)
        x0 = initial_element(space0, problem, init, init_file)
        mcfg = MultilevelConfig(levels=len(n_list), q_inverse=q_inverse, gn=cfg, record_errors=has_ref)
        results = multilevel_solve(sys, scheme, space0, x0, mcfg)
        for i, n in enumerate(n_list):
            if i >= len(results):
                study.rows.append(_failed_row(i, n, N, M, nodes, sys.m, "skipped", "previous level failed"))
                continue
            lvl = results[i]
            study.rows.append(_row_from(i, n, N, M, nodes, sys, lvl.element, lvl.trace, lvl.errors))
        return study

    for i, n in enumerate(n_list):
        space = AnsatzSpace(make_uniform_partition(sys.a, sys.b, n), N, sys.m, sys.k)
        try:
            x0 = initial_element(space, problem, init, init_file)
        except (ArgumentError, ArithmeticError) as exc:
            study.rows.append(_failed_row(i, n, N, M, nodes, sys.m, "init_failed", str(exc)))
            continue
        elem, trace = gn_solve(sys, scheme, x0, cfg)
        rep = None
        if has_ref and trace.termination != Termination.NUMERICAL_ERROR:
            try:
                rep = error_norms(elem, sys)
            except NumericalError as exc:
                trace.message = str(exc)
        study.rows.append(_row_from(i, n, N, M, nodes, sys, elem, trace, rep))
    return study


def _row_from(i, n, N, M, nodes, sys, elem, trace, rep) -> StudyRow:
    from .gauss_newton import Termination

    ok = trace.termination != Termination.NUMERICAL_ERROR
    errs = rep.l2 if rep is not None else np.full(sys.m, np.nan)
    h1d = rep.h1d if rep is not None else float("nan")
    return StudyRow(i, n, N, M, nodes, trace.psi_final, trace.iterations, np.asarray(errs, float), h1d,
                    ok=ok, termination=trace.termination.value, message=trace.message)


# -- smallest singular values ------------------------------------------------

SV_NORMS = ("h1d", "l2", "coeff")


def gram_h1d(space: AnsatzSpace, derivative: bool = True) -> np.ndarray:
    """Gram matrix of the ansatz basis in the H1_D (or, without derivative, L2) inner product."""
    P = space.N + 1
    xq, wq = gauss_nodes(P)
    Ld = lagrange_matrix(space.diff_nodes, xq)
    La = lagrange_matrix(space.alg_nodes, xq)
    Dd = Ld @ space.diff_dmat
    h = space.partition.h
    G = np.zeros((space.dim, space.dim))
    Md = (Ld.T * wq) @ Ld
    Mdd = (Dd.T * wq) @ Dd
    Ma = (La.T * wq) @ La
    for j in range(space.n):
        blk_d = h[j] * Md + (Mdd / h[j] if derivative else 0.0)
        for c in range(space.k):
            idx = space.diff_index[j, :, c]
            G[np.ix_(idx, idx)] += blk_d
        for c in range(space.m - space.k):
            idx = space.alg_index[j, :, c]
            G[np.ix_(idx, idx)] += h[j] * Ma
    return G


@dataclass
class SvScan:
    n: list
    h: np.ndarray
    sigma_min: np.ndarray
    slope: float
    norm: str

    def to_csv(self) -> str:
        lines = ["n,h,sigma_min"] + [f"{n},{h:.6e},{s:.6e}" for n, h, s in zip(self.n, self.h, self.sigma_min)]
        lines.append(f"# slope,{self.slope:.4f}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        lines = ["| n | h | sigma_min |", "|---|---|---|"]
        lines += [f"| {n} | {h:.3e} | {s:.3e} |" for n, h, s in zip(self.n, self.h, self.sigma_min)]
        lines.append(f"\nfitted slope of log sigma_min vs log h: {self.slope:.2f}\n")
        return "\n".join(lines)


def run_sv_scan(problem, N: int, M: int, node_family="uniform_interior", n_list=(16, 32, 64, 128),
                norm: str = "h1d", bc_weight: float = 1.0) -> SvScan:
    """Smallest singular value of the weighted Jacobian at the reference interpolant.

    With ``norm="h1d"`` the columns are measured in the H1_D norm of the ansatz
    space (``sigma_min(J R^{-1})`` with ``R^T R`` the Gram matrix), so the value
    approximates the reciprocal of the discrete operator's inverse bound.
    ``"l2"`` uses the L2 Gram matrix and ``"coeff"`` the raw coefficients.
    """
    import scipy.linalg

    from .collocation import assemble, make_scheme
    from .mesh import make_uniform_partition
    from .problems import get_problem

    if norm not in SV_NORMS:
        raise ArgumentError(f"norm must be one of {SV_NORMS}")
    if isinstance(problem, str):
        problem = get_problem(problem)
    sys = problem.sys
    scheme = make_scheme(M, node_family, N=N, bc_weight=bc_weight)
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2:
        raise ArgumentError("sv-scan needs at least two meshes")
    hs, sig = [], []
    for n in n_list:
        space = AnsatzSpace(make_uniform_partition(sys.a, sys.b, n), N, sys.m, sys.k)
        elem = initial_element(space, problem, "interpolate_reference")
        J = assemble(sys, elem, scheme).J.toarray()
        if norm != "coeff":
            R = scipy.linalg.cholesky(gram_h1d(space, derivative=(norm == "h1d")))
            J = scipy.linalg.solve_triangular(R, J.T, trans="T").T
        sig.append(scipy.linalg.svdvals(J)[-1])
        hs.append(space.partition.h_max)
    hs, sig = np.array(hs), np.array(sig)
    slope = float(np.polyfit(np.log(hs), np.log(sig), 1)[0])
    return SvScan(n_list, hs, sig, slope, norm)

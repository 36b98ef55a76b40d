"""Damped Gauss-Newton iteration on a fixed mesh."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .collocation import CollocationScheme, assemble
from .dae import DAESystem
from .errors import ArgumentError, DomainError, NumericalError
from .lsq import solve_subproblem
from .mesh import AnsatzElement


class Termination(str, Enum):
    NO_IMPROVEMENT = "no_improvement"
    STEP_SMALL = "step_small"
    MAX_ITERS = "max_iters"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class GNConfig:
    max_iters: int = 50
    rel_improvement_tol: float = 1e-12
    step_tol: float = 1e-14
    damping: str = "armijo"
    armijo_sigma: float = 1e-4
    min_damping: float = 2.0 ** -12
    lsq_method: str = "auto"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ArgumentError("max_iters must be >= 1")
        for name in ("rel_improvement_tol", "step_tol", "armijo_sigma", "min_damping"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        if self.damping not in ("none", "armijo"):
            raise ArgumentError("damping must be 'none' or 'armijo'")


@dataclass
class GNRecord:
    k: int
    psi: float
    residual_norm: float
    step_norm: float
    damping_used: float
    rank_estimate: int


@dataclass
class GNTrace:
    records: list = field(default_factory=list)
    termination: Termination | None = None
    psi_initial: float = float("nan")
    message: str = ""

    @property
    def iterations(self) -> int:
        """Accepted steps."""
        return sum(1 for r in self.records if r.damping_used > 0)

    @property
    def psi_final(self) -> float:
        accepted = [r.psi for r in self.records if r.damping_used > 0]
        return accepted[-1] if accepted else self.psi_initial

    def to_jsonl(self) -> str:
        lines = [json.dumps({**asdict(r), "termination": None}) for r in self.records]
        lines.append(json.dumps({"termination": self.termination.value if self.termination else None,
                                 "psi_initial": self.psi_initial, "psi_final": self.psi_final,
                                 "iterations": self.iterations, "message": self.message}))
        return "\n".join(lines) + "\n"


def _step(sys, scheme, elem, cfg):
    res = assemble(sys, elem, scheme, with_jacobian=True)
    sol = solve_subproblem(res.J, res.r, method=cfg.lsq_method)
    return res, sol


def gn_solve(sys: DAESystem, scheme: CollocationScheme, x0: AnsatzElement,
             cfg: GNConfig | None = None) -> tuple[AnsatzElement, GNTrace]:
    """Minimize the discrete functional from ``x0``.

    Each record describes one subproblem: ``psi`` is the value after the step
    (or the unchanged value when the step was rejected, with
    ``damping_used = 0``).
    """
    cfg = cfg or GNConfig()
    if (x0.space.m, x0.space.k) != (sys.m, sys.k):
        raise ArgumentError("initial guess does not match the system dimensions")
    trace = GNTrace()
    x = x0
    try:
        psi = assemble(sys, x, scheme, with_jacobian=False).psi
    except (DomainError, NumericalError) as exc:
        trace.termination = Termination.NUMERICAL_ERROR
        trace.message = str(exc)
        return x, trace
    trace.psi_initial = psi
    for it in range(1, cfg.max_iters + 1):
        try:
            res, sol = _step(sys, scheme, x, cfg)
        except (DomainError, NumericalError) as exc:
            trace.termination = Termination.NUMERICAL_ERROR
            trace.message = str(exc)
            return x, trace
        z = sol.z
        step_norm = float(np.linalg.norm(z))
        predicted = -float(res.r @ res.J.matvec(z))        # = |V F x|^2 >= 0
        lam = 1.0
        new_x, new_psi = None, np.inf
        while True:
            cand = x.with_coeffs(x.coeffs + lam * z)
            try:
                cand_psi = assemble(sys, cand, scheme, with_jacobian=False).psi
            except (DomainError, NumericalError):
                cand_psi = np.inf
            if cfg.damping == "none":
                new_x, new_psi = cand, cand_psi
                break
            if cand_psi <= psi - cfg.armijo_sigma * lam * 2.0 * max(predicted, 0.0):
                new_x, new_psi = cand, cand_psi
                break
            lam *= 0.5
            if lam < cfg.min_damping:
                break
        if new_x is None or not np.isfinite(new_psi) or (cfg.damping == "armijo" and new_psi > psi):
            trace.records.append(GNRecord(it, psi, sol.residual_norm, step_norm, 0.0, sol.rank_estimate))
            trace.termination = Termination.NO_IMPROVEMENT
            if not np.isfinite(new_psi) and cfg.damping == "none":
                trace.termination = Termination.NUMERICAL_ERROR
            return x, trace
        improvement = psi - new_psi
        rel_step = step_norm * lam / (1.0 + np.linalg.norm(x.coeffs))
        trace.records.append(GNRecord(it, new_psi, sol.residual_norm, step_norm, lam, sol.rank_estimate))
        x, old_psi, psi = new_x, psi, new_psi
        if rel_step <= cfg.step_tol:
            trace.termination = Termination.STEP_SMALL
            return x, trace
        if improvement <= cfg.rel_improvement_tol * old_psi:
            trace.termination = Termination.NO_IMPROVEMENT
            return x, trace
    trace.termination = Termination.MAX_ITERS
    return x, trace


def descent_check(sys: DAESystem, scheme: CollocationScheme, elem: AnsatzElement,
                  fd_step: float = 1e-7, lsq_method: str = "auto") -> dict:
    """Compare ``d/ds psi(x + s z)`` at ``s = 0`` with ``-2 |P r|^2``.

    ``|P r|^2 = |r|^2 - |J z + r|^2 = -r^T J z`` is the squared projection of
    the residual onto the range of ``J``; the last form avoids cancellation.

    ``z`` is the Gauss-Newton direction at ``elem``; the derivative is a
    central difference with step ``fd_step`` in ``s``.
    """
    res = assemble(sys, elem, scheme, with_jacobian=True)
    sol = solve_subproblem(res.J, res.r, method=lsq_method)
    z = sol.z
    c = elem.coeffs

    def psi_at(s):
        return assemble(sys, elem.with_coeffs(c + s * z), scheme, with_jacobian=False).psi

    dd = (psi_at(fd_step) - psi_at(-fd_step)) / (2 * fd_step)
    proj = -float(res.r @ res.J.matvec(z))
    return {"directional_derivative": float(dd), "projected_residual_sq": float(proj),
            "predicted_derivative": float(-2.0 * proj), "step": z}

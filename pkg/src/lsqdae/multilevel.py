"""Nested multilevel driver: solve, refine, prolongate, solve again."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .collocation import CollocationScheme
from .dae import DAESystem
from .errors import ArgumentError, NumericalError
from .gauss_newton import GNConfig, GNTrace, Termination, gn_solve
from .mesh import AnsatzElement, AnsatzSpace, prolongate, refine_nested
from .metrics import ErrorReport, error_norms


@dataclass(frozen=True)
class MultilevelConfig:
    """Settings for :func:`multilevel_solve`.

    ``gn_overrides`` maps a level index to keyword overrides of ``gn``.
    """

    levels: int = 1
    q_inverse: int = 2
    gn: GNConfig = field(default_factory=GNConfig)
    gn_overrides: dict = field(default_factory=dict)
    record_errors: bool = True

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 1:
            raise ArgumentError("levels must be an integer >= 1")
        if int(self.q_inverse) != self.q_inverse or self.q_inverse < 2:
            raise ArgumentError("q_inverse must be an integer >= 2")

    def config_for(self, level: int) -> GNConfig:
        over = self.gn_overrides.get(level)
        return replace(self.gn, **over) if over else self.gn


@dataclass
class LevelResult:
    level: int
    element: AnsatzElement
    trace: GNTrace
    errors: Optional[ErrorReport] = None
    psi_warm_start: float = float("nan")

    @property
    def n(self) -> int:
        return self.element.space.n


def multilevel_solve(sys: DAESystem, scheme: CollocationScheme, space0: AnsatzSpace,
                     x0: AnsatzElement, cfg: MultilevelConfig | None = None) -> list[LevelResult]:
    """Run Gauss-Newton on ``space0`` and on ``cfg.levels - 1`` nested refinements.

    Each level starts from the prolongated final iterate of the previous one.
    A level ending in ``numerical_error`` stops the driver; the results
    gathered so far are returned.
    """
    cfg = cfg or MultilevelConfig()
    if x0.space != space0:
        raise ArgumentError("x0 must belong to space0")
    record = cfg.record_errors and sys.reference_solution is not None
    out: list[LevelResult] = []
    space, start = space0, x0
    for level in range(cfg.levels):
        if level > 0:
            space = AnsatzSpace(refine_nested(space.partition, cfg.q_inverse), space.N, space.m, space.k)
            start = prolongate(out[-1].element, space)
        elem, trace = gn_solve(sys, scheme, start, cfg.config_for(level))
        rep = None
        if record and trace.termination != Termination.NUMERICAL_ERROR:
            try:
                rep = error_norms(elem, sys)
            except NumericalError:
                rep = None
        out.append(LevelResult(level, elem, trace, rep, trace.psi_initial))
        if trace.termination == Termination.NUMERICAL_ERROR:
            break
    return out

"""Adaptive ILG loop: linearize on each mesh until the linearization error is
dominated by the discretization estimate, then mark, refine and prolong."""
from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import fem, model
from .estimator import estimate, mark
from .linearization import SchemeSpec, step
from .mesh import make_lshape_initial, prolong, refine

log = logging.getLogger(__name__)

CSV_FIELDS = ("level", "n_elements", "n_dofs", "iterations", "estimator", "h1_error", "energy")


class LinearizationStall(RuntimeError):
    """The per-level step cap was hit before the loop exit criterion held."""


@dataclass(frozen=True)
class ILGConfig:
    scheme: SchemeSpec
    lam: float = 0.5
    theta: float = 0.5
    eps_tol: float = 0.0
    max_elements: int = 200_000
    max_linear_steps_per_level: int = 500

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.max_elements <= 0 or self.max_linear_steps_per_level <= 0:
            raise ValueError("budgets must be positive")


@dataclass
class StepRecord:
    xi: float          # ||u^n - u^{n-1}||_X
    upsilon: float     # eta_N(u^n)
    energy: float
    energy_decrease: float
    delta: float


@dataclass
class LevelRecord:
    level: int
    n_elements: int
    n_dofs: int
    iterations: int
    xi: float
    upsilon: float
    estimator: float
    h1_error: float
    energy: float
    steps: list = field(default_factory=list)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


@dataclass
class RunRecord:
    config: ILGConfig
    problem: str
    levels: list = field(default_factory=list)
    stop_reason: str = ""
    mesh: object = None
    solution: object = None

    @property
    def exact_solution_found(self) -> bool:
        return self.stop_reason == "exact"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(lv, name) for lv in self.levels])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for lv in self.levels:
            w.writerow([repr(v) if isinstance(v, float) else v for v in lv.row().values()])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w", newline="") as fh:
            fh.write(self.to_csv())
        os.replace(tmp, path)


def _level_loop(cfg: ILGConfig, prob, mesh, u):
    """Linearization steps on one mesh; returns (u_N, indicators, steps)."""
    xi, upsilon = 1.0, 0.0
    steps = []
    indicators = None
    while xi > cfg.lam * upsilon:
        if len(steps) >= cfg.max_linear_steps_per_level:
            raise LinearizationStall(
                f"{len(steps)} steps on a mesh with {mesh.n_elements} elements: "
                f"xi={xi:.3e} > lambda*eta={cfg.lam * upsilon:.3e}")
        u_next, delta = step(cfg.scheme, prob, mesh, u)
        decrease = model.energy_decrease(prob, mesh, u, u_next)
        xi = (u_next - u).norm()
        indicators = estimate(prob, mesh, u_next)
        upsilon = indicators.total
        u = u_next
        steps.append(StepRecord(xi, upsilon, model.energy(prob, mesh, u), decrease, delta))
    return u, indicators, steps


def run(cfg: ILGConfig, prob, initial_mesh=None) -> RunRecord:
    """Adaptive ILG from u_0^0 = 0 on the L-shape (or ``initial_mesh``).

    Stops when the estimator drops below ``eps_tol``, when it vanishes (the
    discrete iterate is then the exact solution), or when the next mesh
    would exceed ``max_elements``.
    """
    mesh = make_lshape_initial() if initial_mesh is None else initial_mesh
    u = fem.DiscreteFunction.zero(mesh)
    record = RunRecord(cfg, prob.name)
    level = 0
    while True:
        u, indicators, steps = _level_loop(cfg, prob, mesh, u)
        eta = indicators.total
        record.levels.append(LevelRecord(
            level=level,
            n_elements=mesh.n_elements,
            n_dofs=fem.dofmap(mesh).n_dofs,
            iterations=len(steps),
            xi=steps[-1].xi,
            upsilon=steps[-1].upsilon,
            estimator=eta,
            h1_error=model.h1_error(prob, mesh, u),
            energy=steps[-1].energy,
            steps=steps,
        ))
        log.info("level %d: %d elements, %d steps, eta=%.4e", level, mesh.n_elements, len(steps), eta)
        record.mesh, record.solution = mesh, u
        if eta == 0.0:
            record.stop_reason = "exact"
            break
        if eta < cfg.eps_tol:
            record.stop_reason = "tolerance"
            break
        fine = refine(mesh, mark(indicators, cfg.theta))
        if fine.n_elements > cfg.max_elements:
            record.stop_reason = "budget"
            break
        u = fem.DiscreteFunction(fine, prolong(u.values, fine))
        mesh = fine
        level += 1
    return record


def fit_slope(n_elements, values, window=(1e3, 1e5)) -> float:
    """Least-squares slope of log(values) against log(n_elements) inside ``window``."""
    n = np.asarray(n_elements, dtype=float)
    y = np.asarray(values, dtype=float)
    lo, hi = window
    sel = (n >= lo) & (n <= hi)
    if sel.sum() < 3:
        raise ValueError(f"need at least 3 levels inside {window}, got {int(sel.sum())}")
    return float(np.polyfit(np.log(n[sel]), np.log(y[sel]), 1)[0])


def slope(record: RunRecord, field: str = "estimator", window=(1e3, 1e5)) -> float:
    """Convergence rate of ``estimator`` or ``error`` with respect to #elements."""
    column = {"estimator": "estimator", "error": "h1_error", "h1_error": "h1_error"}[field]
    return fit_slope(record.column("n_elements"), record.column(column), window)

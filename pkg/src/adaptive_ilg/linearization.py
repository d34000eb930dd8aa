"""One step of the unified iterative linearization  A[u^n] u^{n+1} = f(u^n)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem, model

SCHEMES = ("zarantonello", "kacanov", "newton")

# Absolute round-off allowance when deciding whether the energy went up.
ENERGY_SLACK = 1e-12

MAX_HALVINGS = 10


class DampingCollapse(RuntimeError):
    """Newton damping was halved MAX_HALVINGS times without an energy decrease."""


@dataclass(frozen=True)
class SchemeSpec:
    """Linearization scheme and its step/damping parameter.

    ``delta`` is the Zarantonello step size, or the initial Newton damping
    tried on every step. It is ignored by the Kacanov scheme.
    """

    kind: str
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @classmethod
    def zarantonello(cls, delta: float) -> "SchemeSpec":
        return cls("zarantonello", delta)

    @classmethod
    def kacanov(cls) -> "SchemeSpec":
        return cls("kacanov", 1.0)

    @classmethod
    def newton(cls, delta: float = 1.0) -> "SchemeSpec":
        return cls("newton", delta)

    def with_delta(self, delta: float) -> "SchemeSpec":
        return SchemeSpec(self.kind, delta)

    def __str__(self):
        return self.kind if self.kind == "kacanov" else f"{self.kind}(delta={self.delta:g})"


def step(scheme: SchemeSpec, prob, mesh, u_n):
    """Return ``(u_next, delta_used)``.

    Newton steps that increase the energy are retried with halved damping.
    Since F'(u^n) does not depend on the damping, the retry only rescales the
    undamped increment.
    """
    system = fem.assemble(scheme, prob, mesh, u_n)
    dm = system.dofs
    increment = dm.extend(fem.solve((system.matrix, system.correction_rhs)))
    u_vals = np.asarray(getattr(u_n, "values", u_n), dtype=float)
    if scheme.kind != "newton":
        return fem.DiscreteFunction(mesh, u_vals + increment), scheme.delta

    delta = scheme.delta
    # the assembled increment already carries the configured damping
    unit = increment / delta
    for _ in range(MAX_HALVINGS + 1):
        u_next = fem.DiscreteFunction(mesh, u_vals + delta * unit)
        if model.energy_decrease(prob, mesh, u_vals, u_next) >= -ENERGY_SLACK:
            return u_next, delta
        delta *= 0.5
    raise DampingCollapse(f"energy did not decrease after {MAX_HALVINGS} halvings of delta={scheme.delta:g}")


def estimate_CH(trace, min_step=1e-13):
    """Smallest observed ratio (energy decrease) / ||step||^2.

    ``trace`` holds ``(energy_decrease, step_norm)`` pairs, one per step.
    Steps shorter than ``min_step`` are ignored; returns ``None`` if none remain.
    """
    ratios = [dh / s ** 2 for dh, s in trace if s > min_step]
    if not ratios:
        return None
    return float(min(ratios))


def contraction_constant(L_F: float, nu: float, beta: float, C_H: float) -> float:
    """C = L_F (1 + beta/nu)^2 / (2 C_H) from the tail-sum bound."""
    return L_F * (1.0 + beta / nu) ** 2 / (2.0 * C_H)


def iterate(scheme: SchemeSpec, prob, mesh, n_steps: int, u0=None, tol: float = 0.0):
    """Run up to ``n_steps`` steps on a fixed mesh.

    Returns the list of iterates ``[u^0, u^1, ...]`` and the per-step
    ``(energy_decrease, step_norm)`` pairs. Stops early once a step is
    shorter than ``tol``.
    """
    u = fem.DiscreteFunction.zero(mesh) if u0 is None else u0
    iterates = [u]
    trace = []
    for _ in range(n_steps):
        u_next, _ = step(scheme, prob, mesh, u)
        trace.append((model.energy_decrease(prob, mesh, u, u_next), (u_next - u).norm()))
        iterates.append(u_next)
        u = u_next
        if trace[-1][1] <= tol:
            break
    return iterates, trace

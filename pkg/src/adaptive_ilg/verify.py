"""Independent oracles and checks of the iteration theory on recorded traces.

The discrete solution is computed by a full Newton iteration with sparse
direct solves, independent of the CG-based linearization path. Each check
returns a :class:`CheckReport`; :func:`run_suite` collects them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import fem, model
from .linearization import ENERGY_SLACK, SCHEMES, SchemeSpec, contraction_constant, estimate_CH, iterate
from .mesh import make_lshape_initial, min_angle, refine
from .quadrature import rule


class OracleError(RuntimeError):
    pass


@dataclass
class OracleSolution:
    mesh: object
    solution: fem.DiscreteFunction
    residual_norm: float
    newton_steps: int


@dataclass
class CheckReport:
    name: str
    bound: float
    measured: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: measured={self.measured:.6g} bound={self.bound:.6g}{extra}"


def oracle_solve(prob, mesh, tol=1e-13, max_steps=100, max_dofs=5000) -> OracleSolution:
    """Discrete solution u*_N by damped Newton with energy backtracking."""
    dm = fem.dofmap(mesh)
    if dm.n_dofs > max_dofs:
        raise OracleError(f"{dm.n_dofs} DOFs exceed the oracle limit of {max_dofs}")
    newton = SchemeSpec.newton(1.0)
    u = np.zeros(mesh.n_vertices)
    for k in range(max_steps + 1):
        r = dm.restrict(model.residual_vector(prob, mesh, u))
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol:
            return OracleSolution(mesh, fem.DiscreteFunction(mesh, u), rnorm, k)
        J = fem.assemble(newton, prob, mesh, u).matrix
        d = dm.extend(spla.spsolve(J.tocsc(), -r))
        t = 1.0
        for _ in range(30):
            trial = u + t * d
            if model.energy_decrease(prob, mesh, u, trial) >= -ENERGY_SLACK:
                break
            t *= 0.5
        else:
            raise OracleError("Newton oracle: no energy decrease along the Newton direction")
        u = trial
    raise OracleError(f"Newton oracle did not converge: residual {rnorm:.3e} after {max_steps} steps")


def check_lemma21(iterates, oracle: OracleSolution, nu: float, beta: float, name="iteration-error-bound",
                  min_step=1e-12) -> CheckReport:
    """||u*_N - u^n|| <= (1 + beta/nu) ||u^n - u^{n-1}|| along a trace."""
    bound = 1.0 + beta / nu
    ratios = []
    for prev, cur in zip(iterates[:-1], iterates[1:]):
        step_norm = (cur - prev).norm()
        if step_norm < min_step:
            continue
        ratios.append((oracle.solution - cur).norm() / step_norm)
    worst = max(ratios) if ratios else 0.0
    violations = sum(r > bound for r in ratios)
    return CheckReport(name, bound, worst, violations == 0, f"{len(ratios)} steps, {violations} violations")


def check_energy_sandwich(prob, mesh, u, oracle: OracleSolution, rel_slack=1e-8,
                          name="energy-sandwich") -> CheckReport:
    """nu/2 ||u*_N - u||^2 <= H(u) - H(u*_N) <= L_F/2 ||u*_N - u||^2."""
    law = prob.law
    if not isinstance(u, fem.DiscreteFunction):
        u = fem.DiscreteFunction(mesh, u)
    gap = model.energy_decrease(prob, mesh, u, oracle.solution)
    dist2 = (oracle.solution - u).norm() ** 2
    lower = 0.5 * law.nu * dist2
    upper = 0.5 * law.lipschitz * dist2
    ok = lower * (1 - rel_slack) <= gap <= upper * (1 + rel_slack)
    ratio = gap / dist2 if dist2 > 0 else 0.0
    return CheckReport(name, upper / dist2 if dist2 > 0 else 0.0, ratio, bool(ok),
                       f"ratio must lie in [{0.5 * law.nu:.4g}, {0.5 * law.lipschitz:.4g}]")


def tail_margins(step_sq, C: float, floor=1e-26):
    """Worst ratios for the tail-sum bound and for the geometric bound.

    ``step_sq[j-1] = ||u^j - u^{j-1}||^2``. Ratios <= 1 mean the bound holds.
    Steps at or below ``floor`` are treated as converged and skipped as
    reference terms.
    """
    a = np.asarray(step_sq, dtype=float)
    tails = np.concatenate([np.cumsum(a[::-1])[::-1][1:], [0.0]])
    ok = a > floor
    tail_ratio = np.max(tails[ok] / (C * a[ok])) if ok.any() else 0.0
    n = np.arange(1, len(a) + 1)
    geo = C * (1.0 + 1.0 / C) ** (2.0 - n) * a[0]
    geo_ratio = np.max(a[1:] / geo[1:]) if len(a) > 1 else 0.0
    return float(tail_ratio), float(geo_ratio)


def check_tail_bounds(step_norms, C: float, name="tail-bounds", rel_slack=1e-10) -> CheckReport:
    step_sq = np.asarray(step_norms, dtype=float) ** 2
    tail_ratio, geo_ratio = tail_margins(step_sq, C)
    worst = max(tail_ratio, geo_ratio)
    return CheckReport(name, 1.0, worst, worst <= 1.0 + rel_slack,
                       f"C={C:.4g}, tail ratio {tail_ratio:.3g}, geometric ratio {geo_ratio:.3g}")


def default_scheme(kind: str, prob) -> SchemeSpec:
    """Step parameters used in the experiments: Zarantonello 0.85 (smooth) / 0.5 (singular), Newton 1."""
    if kind == "zarantonello":
        return SchemeSpec.zarantonello(0.85 if prob.name.startswith("smooth") else 0.5)
    if kind == "kacanov":
        return SchemeSpec.kacanov()
    return SchemeSpec.newton(1.0)


def scheme_limit(scheme, prob, mesh, tol=1e-12, max_steps=500):
    iterates, _ = iterate(scheme, prob, mesh, max_steps, tol=tol)
    return iterates[-1]


def fd_gradient_errors(prob, mesh, u, v, ts=(1e-3, 1e-4, 1e-5)):
    """|(H(u+tv) - H(u))/t - <F(u), v>| for each t."""
    exact = model.residual_apply(prob, mesh, u, v)
    out = []
    for t in ts:
        dh = -model.energy_decrease(prob, mesh, u, u.values + t * v.values)
        out.append(abs(dh / t - exact))
    return np.array(out)


def fd_jacobian_errors(prob, mesh, u, v, w, ts=(1e-4, 1e-5)):
    """|(<F(u+tv), w> - <F(u), w>)/t - w^T F'(u) v| for each t."""
    dm = fem.dofmap(mesh)
    J = fem.assemble(SchemeSpec.newton(1.0), prob, mesh, u).matrix
    exact = float(dm.restrict(w.values) @ (J @ dm.restrict(v.values)))
    base = model.residual_apply(prob, mesh, u, w)
    out = []
    for t in ts:
        shifted = model.residual_apply(prob, mesh, u.values + t * v.values, w)
        out.append(abs((shifted - base) / t - exact))
    return np.array(out), exact


def random_function(mesh, rng, scale=1.0) -> fem.DiscreteFunction:
    return fem.DiscreteFunction(mesh, scale * rng.standard_normal(mesh.n_vertices))


def _smooth_random(mesh, rng) -> fem.DiscreteFunction:
    """Low-frequency random function, so that FD steps stay well resolved."""
    a, b, c = rng.uniform(0.5, 2.0, size=3)
    v = mesh.vertices
    return fem.DiscreteFunction(mesh, c * np.sin(a * np.pi * v[:, 0] + 0.3) * np.cos(b * np.pi * v[:, 1]))


def run_suite(quick: bool = True, seed: int = 0):
    """Run the verification checks; returns a list of :class:`CheckReport`."""
    rng = np.random.default_rng(seed)
    reports = []
    problems = [model.smooth_problem(), model.singular_problem()]
    mesh0 = make_lshape_initial()
    meshes = [mesh0] if quick else [mesh0, refine(mesh0, np.arange(mesh0.n_elements))]

    # quadrature exactness
    worst = 0.0
    for deg in (1, 2, 5):
        q = rule(deg)
        for i in range(deg + 1):
            for j in range(deg + 1 - i):
                x, y = q.points[:, 1], q.points[:, 2]
                approx = 0.5 * np.dot(q.weights, x ** i * y ** j)
                exact = _monomial_integral(i, j)
                worst = max(worst, abs(approx - exact) / exact)
    reports.append(CheckReport("quadrature-exactness", 1e-13, worst, worst <= 1e-13))

    # mesh conformity, angles and area over refinement sweeps
    m = mesh0
    angle = min_angle(m)
    area_err = 0.0
    sweeps = 5 if quick else 20
    for _ in range(sweeps):
        marked = rng.choice(m.n_elements, size=max(1, m.n_elements // 8), replace=False)
        m = refine(m, marked)
        m.check_conformity()
        angle = min(angle, min_angle(m))
        area_err = max(area_err, abs(m.areas.sum() - 3.0) / 3.0)
    reports.append(CheckReport("nvb-min-angle", 0.3, angle, angle >= 0.3, f"{sweeps} sweeps"))
    reports.append(CheckReport("nvb-area", 1e-12, area_err, area_err <= 1e-12))

    for prob in problems:
        mesh = mesh0
        u = _smooth_random(mesh, rng)
        v = _smooth_random(mesh, rng)
        w = _smooth_random(mesh, rng)
        errs = fd_gradient_errors(prob, mesh, u, v)
        order = np.log10(errs[0] / errs[-1]) / 2.0
        reports.append(CheckReport(f"fd-gradient[{prob.name}]", 0.8, order, order >= 0.8,
                                   "observed order in t"))
        jerrs, _ = fd_jacobian_errors(prob, mesh, u, v, w)
        order = np.log10(jerrs[0] / jerrs[1])
        reports.append(CheckReport(f"fd-jacobian[{prob.name}]", 0.8, order, order >= 0.8,
                                   "observed order in t"))

        for mesh in meshes:
            oracle = oracle_solve(prob, mesh)
            tag = f"{prob.name},{mesh.n_elements}"
            for kind in SCHEMES:
                scheme = default_scheme(kind, prob)
                _, beta = fem.scheme_constants(scheme, prob.law)
                iterates, trace = iterate(scheme, prob, mesh, 200, tol=1e-12)
                reports.append(check_lemma21(iterates, oracle, prob.law.nu, beta, f"iteration-error-bound[{kind},{tag}]"))
                dist = (iterates[-1] - oracle.solution).norm()
                reports.append(CheckReport(f"oracle-agreement[{kind},{tag}]", 1e-8, dist, dist <= 1e-8))
                c_h = estimate_CH(trace)
                reports.append(CheckReport(f"energy-decrease[{kind},{tag}]", 0.0, c_h, c_h is not None and c_h > 0,
                                           "estimated C_H"))
                if c_h is not None and c_h > 0:
                    C = contraction_constant(prob.law.lipschitz, prob.law.nu, beta, c_h)
                    norms = [s for _, s in trace]
                    reports.append(check_tail_bounds(norms, C, f"tail-bounds[{kind},{tag}]"))
            fails = 0
            n_samples = 20 if quick else 100
            for k in range(n_samples):
                eps = (1e-3, 1e-2, 1e-1)[k % 3]
                pert = oracle.solution.values + eps * random_function(mesh, rng).values
                rep = check_energy_sandwich(prob, mesh, fem.DiscreteFunction(mesh, pert), oracle)
                fails += not rep.passed
            reports.append(CheckReport(f"energy-sandwich[{tag}]", 0, fails, fails == 0,
                                       f"{n_samples} perturbations"))
    return reports


def _monomial_integral(i: int, j: int) -> float:
    """Integral of x^i y^j over the reference triangle: i! j! / (i + j + 2)!."""
    from math import factorial
    return factorial(i) * factorial(j) / factorial(i + j + 2)

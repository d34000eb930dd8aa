"""Acceptance criteria, one test per criterion, each printing a single PASS/FAIL line.

The adaptive runs are cached per module, so criteria 1-3 and 5 share them.
"""
from functools import lru_cache

import numpy as np
import pytest

from adaptive_ilg import fem, model, verify
from adaptive_ilg.driver import ILGConfig, run, slope
from adaptive_ilg.linearization import SCHEMES, SchemeSpec, contraction_constant, estimate_CH, iterate
from adaptive_ilg.mesh import make_lshape_initial, min_angle, refine
from adaptive_ilg.quadrature import rule

BUDGET = 200_000
WINDOW = (1e3, 1e5)
PROBLEMS = {"smooth": model.smooth_problem(), "singular": model.singular_problem()}

pytestmark = pytest.mark.acceptance


def report(capsys, criterion, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    assert ok, detail


@lru_cache(maxsize=None)
def adaptive(problem, kind, lam, theta):
    prob = PROBLEMS[problem]
    return run(ILGConfig(verify.default_scheme(kind, prob), lam=lam, theta=theta, max_elements=BUDGET), prob)


@lru_cache(maxsize=None)
def meshes():
    m0 = make_lshape_initial()
    m1 = refine(m0, np.arange(m0.n_elements))
    # an adaptively graded mesh from the corner problem, below the oracle's DOF limit
    rec = run(ILGConfig(SchemeSpec.kacanov(), max_elements=9000), PROBLEMS["singular"])
    return m0, m1, rec.mesh


@lru_cache(maxsize=None)
def fixed_trace(problem, kind, mesh_index, min_steps=12):
    prob = PROBLEMS[problem]
    mesh = meshes()[mesh_index]
    scheme = verify.default_scheme(kind, prob)
    iterates, trace = iterate(scheme, prob, mesh, 500, tol=1e-12)
    if len(trace) < min_steps:
        iterates, trace = iterate(scheme, prob, mesh, min_steps)
    return iterates, trace


def test_criterion_1_optimal_rate_smooth(capsys):
    parts, ok = [], True
    for kind in SCHEMES:
        rec = adaptive("smooth", kind, 0.5, 0.5)
        se, sr = slope(rec, "estimator", WINDOW), slope(rec, "error", WINDOW)
        ok &= -0.6 <= se <= -0.4 and -0.6 <= sr <= -0.4
        parts.append(f"{kind} eta {se:.3f} err {sr:.3f}")
    report(capsys, 1, ok, "slopes in [-0.6,-0.4]: " + "; ".join(parts))


def test_criterion_2_rate_singular(capsys):
    parts, ok = [], True
    for kind in SCHEMES:
        rec = adaptive("singular", kind, 0.5, 0.5)
        se, sr = slope(rec, "estimator", WINDOW), slope(rec, "error", WINDOW)
        ok &= -0.6 <= se <= -0.4 and -0.6 <= sr <= -0.4
        parts.append(f"{kind} eta {se:.3f} err {sr:.3f}")
    uniform = adaptive("singular", "kacanov", 0.5, 0.0)
    su = slope(uniform, "estimator", WINDOW)
    ok &= -0.42 <= su <= -0.26
    parts.append(f"uniform eta {su:.3f} in [-0.42,-0.26]")
    report(capsys, 2, ok, "; ".join(parts))


def test_criterion_3_bounded_iteration_counts(capsys):
    parts, ok = [], True
    for problem in PROBLEMS:
        for lam, cap in ((0.1, 30), (0.001, 60)):
            counts = {kind: adaptive(problem, kind, lam, 0.5).column("iterations") for kind in SCHEMES}
            for kind, its in counts.items():
                tail = its[3:]
                trend = np.polyfit(np.arange(len(tail)), tail, 1)[0]
                ok &= tail.max() <= cap and trend <= 0.1
                parts.append(f"{problem} lam={lam:g} {kind} max {tail.max()} trend {trend:+.3f}")
            if lam == 0.001:
                n = min(len(v) for v in counts.values())
                z, k, nw = (counts[s][:n] for s in ("zarantonello", "kacanov", "newton"))
                frac = np.mean((nw <= k) & (k <= z))
                ok &= frac >= 0.7
                parts.append(f"{problem} ordering N<=K<=Z on {frac:.0%} of levels")
    report(capsys, 3, ok, "; ".join(parts))


def test_criterion_4_iteration_error_bound(capsys):
    parts, ok = [], True
    m0, m1, _ = meshes()
    assert fem.dofmap(m1).n_dofs <= 500
    for problem, prob in PROBLEMS.items():
        for index, mesh in enumerate((m0, m1)):
            oracle = verify.oracle_solve(prob, mesh)
            for kind in SCHEMES:
                scheme = verify.default_scheme(kind, prob)
                _, beta = fem.scheme_constants(scheme, prob.law)
                iterates, _ = fixed_trace(problem, kind, index)
                rep = verify.check_lemma21(iterates, oracle, prob.law.nu, beta)
                ok &= rep.passed
                parts.append(f"{problem}/{mesh.n_elements}/{kind} {rep.measured:.3f}<={rep.bound:.3f}")
    report(capsys, 4, ok, "; ".join(parts))


def test_criterion_5_energy(capsys):
    parts, ok = [], True
    # every step of every adaptive run recorded above
    worst, n_steps = np.inf, 0
    for problem in PROBLEMS:
        for lam, theta in ((0.5, 0.5), (0.1, 0.5), (0.001, 0.5)):
            for kind in SCHEMES:
                for lv in adaptive(problem, kind, lam, theta).levels:
                    for st in lv.steps:
                        worst = min(worst, st.energy_decrease)
                        n_steps += 1
    ok &= worst >= -1e-12
    parts.append(f"min decrease {worst:.3e} over {n_steps} steps")

    for problem in PROBLEMS:
        for kind in SCHEMES:
            c_h = min(estimate_CH(fixed_trace(problem, kind, i)[1]) for i in (0, 1))
            ok &= c_h > 0
            parts.append(f"C_H {problem}/{kind} {c_h:.3f}")

    rng = np.random.default_rng(5)
    fails = 0
    for prob in PROBLEMS.values():
        mesh = meshes()[0]
        oracle = verify.oracle_solve(prob, mesh)
        for k in range(100):
            eps = (1e-3, 1e-2, 1e-1)[k % 3]
            u = oracle.solution.values + eps * rng.standard_normal(mesh.n_vertices)
            fails += not verify.check_energy_sandwich(prob, mesh, u, oracle).passed
    ok &= fails == 0
    parts.append(f"sandwich failures {fails}/200")

    prob = PROBLEMS["smooth"]
    delta = 0.3
    theory = 1 / delta - prob.law.lipschitz / 2
    c_h = min(estimate_CH(iterate(SchemeSpec.zarantonello(delta), prob, m, 500, tol=1e-12)[1])
              for m in meshes()[:2])
    ok &= c_h >= 0.8 * theory
    parts.append(f"Zarantonello 0.3 C_H {c_h:.3f} >= 0.8*{theory:.4f}")
    report(capsys, 5, ok, "; ".join(parts))


def test_criterion_6_tail_bounds(capsys):
    parts, ok = [], True
    prob = PROBLEMS["smooth"]
    for index in (0, 1):
        for kind in SCHEMES:
            _, trace = fixed_trace("smooth", kind, index)
            assert len(trace) >= 12
            scheme = verify.default_scheme(kind, prob)
            _, beta = fem.scheme_constants(scheme, prob.law)
            C = contraction_constant(prob.law.lipschitz, prob.law.nu, beta, estimate_CH(trace))
            rep = verify.check_tail_bounds([s for _, s in trace], C)
            ok &= rep.passed
            parts.append(f"{kind}/{index} {len(trace)} steps worst {rep.measured:.3g}")
    report(capsys, 6, ok, "; ".join(parts))


def test_criterion_7_oracle_equivalence(capsys):
    parts, ok = [], True
    for problem, prob in PROBLEMS.items():
        for index, mesh in enumerate(meshes()):
            assert fem.dofmap(mesh).n_dofs <= 5000
            oracle = verify.oracle_solve(prob, mesh)
            sols = [oracle.solution] + [fixed_trace(problem, kind, index)[0][-1] for kind in SCHEMES]
            worst = max((a - b).norm() for i, a in enumerate(sols) for b in sols[i + 1:])
            ok &= worst <= 1e-8
            parts.append(f"{problem}/{fem.dofmap(mesh).n_dofs} dofs {worst:.2e}")
    report(capsys, 7, ok, "pairwise <= 1e-8: " + "; ".join(parts))


def test_criterion_8_kernels(capsys):
    parts, ok = [], True
    worst = 0.0
    for deg in (1, 2, 5):
        q = rule(deg)
        for i in range(deg + 1):
            for j in range(deg + 1 - i):
                approx = 0.5 * np.dot(q.weights, q.points[:, 1] ** i * q.points[:, 2] ** j)
                worst = max(worst, abs(approx / verify._monomial_integral(i, j) - 1))
    ok &= worst <= 1e-13
    parts.append(f"quadrature {worst:.1e}")

    rng = np.random.default_rng(8)
    mesh = make_lshape_initial()
    for name, prob in PROBLEMS.items():
        u, v, w = (verify._smooth_random(mesh, rng) for _ in range(3))
        g = verify.fd_gradient_errors(prob, mesh, u, v)
        g_order = np.log10(g[0] / g[-1]) / 2
        jac, _ = verify.fd_jacobian_errors(prob, mesh, u, v, w)
        j_order = np.log10(jac[0] / jac[1])
        ok &= 0.8 <= g_order <= 1.2 and j_order >= 0.8
        parts.append(f"{name} FD orders {g_order:.2f}/{j_order:.2f}")

    m, angle, area = mesh, np.pi, 0.0
    for _ in range(20):
        m = refine(m, rng.choice(m.n_elements, size=max(1, m.n_elements // 10), replace=False))
        m.check_conformity()
        angle = min(angle, min_angle(m))
        area = max(area, abs(m.areas.sum() / 3.0 - 1))
    ok &= angle >= 0.3 and area <= 1e-12
    parts.append(f"20 sweeps to {m.n_elements} elements, min angle {angle:.4f}, area {area:.1e}")
    report(capsys, 8, ok, "; ".join(parts))

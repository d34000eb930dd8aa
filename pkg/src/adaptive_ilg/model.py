"""Quasi-linear diffusion model  -div(mu(|grad u|^2) grad u) = g  with manufactured data.

Discrete functions enter the functions below as nodal value arrays on the mesh
(or anything exposing ``.values``); boundary entries are expected to be zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quadrature import rule

LOAD_RULE = rule(5)


@dataclass(frozen=True)
class DiffusionLaw:
    """Scalar diffusion law mu(t), t = |grad u|^2, with its potential.

    ``psi(s) = 1/2 int_0^s mu``. ``psi_increment(s, ds)`` returns
    ``psi(s + ds) - psi(s)`` without cancellation. ``m_mu``/``M_mu`` bound the
    slope of the scalar flux ``t -> mu(t^2) t``; ``mu_min``/``mu_max`` bound mu.
    """

    name: str
    mu: Callable
    mu_prime: Callable
    psi: Callable
    psi_increment: Callable
    m_mu: float
    M_mu: float
    mu_min: float
    mu_max: float

    @property
    def nu(self) -> float:
        """Strong monotonicity constant of the operator."""
        return self.m_mu

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant L_F = 3 M_mu of the operator."""
        return 3.0 * self.M_mu


def smooth_law() -> DiffusionLaw:
    return DiffusionLaw(
        name="rational",
        mu=lambda t: 1.0 / (t + 1.0) + 0.5,
        mu_prime=lambda t: -1.0 / (t + 1.0) ** 2,
        psi=lambda s: 0.5 * np.log1p(s) + 0.25 * s,
        psi_increment=lambda s, ds: 0.5 * np.log1p(ds / (1.0 + s)) + 0.25 * ds,
        m_mu=3.0 / 8.0,
        M_mu=1.5,
        mu_min=0.5,
        mu_max=1.5,
    )


def exponential_law() -> DiffusionLaw:
    return DiffusionLaw(
        name="exponential",
        mu=lambda t: 1.0 + np.exp(-t),
        mu_prime=lambda t: -np.exp(-t),
        psi=lambda s: 0.5 * (s + 1.0 - np.exp(-s)),
        psi_increment=lambda s, ds: 0.5 * ds - 0.5 * np.exp(-s) * np.expm1(-ds),
        m_mu=1.0 - 2.0 * np.exp(-1.5),
        M_mu=2.0,
        mu_min=1.0,
        mu_max=2.0,
    )


def constant_law(c: float = 1.0) -> DiffusionLaw:
    """Linear diffusion mu == c, turning the problem into a Poisson problem."""
    return DiffusionLaw(
        name=f"constant{c:g}",
        mu=lambda t: c + 0.0 * t,
        mu_prime=lambda t: 0.0 * t,
        psi=lambda s: 0.5 * c * s,
        psi_increment=lambda s, ds: 0.5 * c * ds,
        m_mu=c,
        M_mu=c,
        mu_min=c,
        mu_max=c,
    )


@dataclass(frozen=True, eq=False)
class ManufacturedProblem:
    """A diffusion law together with a known exact solution vanishing on the boundary.

    The load is never needed pointwise for the Galerkin system: ``<g, v>`` is
    evaluated as ``int flux(u*) . grad v``. Pointwise ``g`` (for the estimator)
    comes from ``g_override`` if set, else from the exact Hessian if known,
    else from central differences of the exact flux.
    """

    name: str
    law: DiffusionLaw
    exact_u: Callable
    exact_grad: Callable
    exact_hessian: Callable | None = None
    g_override: Callable | None = None

    def flux(self, x, y) -> np.ndarray:
        g = self.exact_grad(x, y)
        s = g[..., 0] ** 2 + g[..., 1] ** 2
        return self.law.mu(s)[..., None] * g

    def g_pointwise(self, x, y, h=1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.g_override is not None:
            return np.asarray(self.g_override(x, y), dtype=float) + 0.0 * x
        if self.exact_hessian is not None:
            g = self.exact_grad(x, y)
            hess = self.exact_hessian(x, y)
            s = g[..., 0] ** 2 + g[..., 1] ** 2
            hg = np.einsum("...ij,...j->...i", hess, g)
            lap = hess[..., 0, 0] + hess[..., 1, 1]
            return -self.law.mu(s) * lap - 2.0 * self.law.mu_prime(s) * np.einsum("...i,...i->...", hg, g)
        k = 1e-6 * np.broadcast_to(np.asarray(h, dtype=float), x.shape)
        dfx = self.flux(x + k, y)[..., 0] - self.flux(x - k, y)[..., 0]
        dfy = self.flux(x, y + k)[..., 1] - self.flux(x, y - k)[..., 1]
        return -(dfx + dfy) / (2.0 * k)

    def with_law(self, law: DiffusionLaw) -> "ManufacturedProblem":
        return ManufacturedProblem(f"{self.name}-{law.name}", law, self.exact_u,
                                   self.exact_grad, self.exact_hessian, self.g_override)


def _sine_u(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _sine_grad(x, y):
    return np.pi * np.stack([np.cos(np.pi * x) * np.sin(np.pi * y),
                             np.sin(np.pi * x) * np.cos(np.pi * y)], axis=-1)


def _sine_hessian(x, y):
    ss = np.sin(np.pi * x) * np.sin(np.pi * y)
    cc = np.cos(np.pi * x) * np.cos(np.pi * y)
    row0 = np.stack([-ss, cc], axis=-1)
    row1 = np.stack([cc, -ss], axis=-1)
    return np.pi ** 2 * np.stack([row0, row1], axis=-2)


def smooth_problem() -> ManufacturedProblem:
    """u* = sin(pi x) sin(pi y) with mu(t) = 1/(t+1) + 1/2."""
    return ManufacturedProblem("smooth", smooth_law(), _sine_u, _sine_grad, _sine_hessian)


def linear_problem(c: float = 1.0) -> ManufacturedProblem:
    """The smooth exact solution with constant diffusion (a Poisson problem)."""
    return smooth_problem().with_law(constant_law(c))


def _polar(x, y):
    r = np.hypot(x, y)
    if np.any(r == 0.0):
        raise ValueError("singular solution evaluated at the origin")
    phi = np.arctan2(y, x)
    phi = np.where(phi < 0.0, phi + 2.0 * np.pi, phi)
    return r, phi


def _corner_u(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r, phi = _polar(x, y)
    return r ** (2 / 3) * np.sin(2 * phi / 3) * (1 - x ** 2) * (1 - y ** 2) * (x / r)


def _corner_grad(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r, phi = _polar(x, y)
    # u = S * C * Q with S = r^(2/3) sin(2 phi/3), C = cos(phi) = x/r, Q = (1-x^2)(1-y^2)
    S = r ** (2 / 3) * np.sin(2 * phi / 3)
    C = x / r
    Q = (1 - x ** 2) * (1 - y ** 2)
    pref = (2 / 3) * r ** (-1 / 3)
    dS = np.stack([-pref * np.sin(phi / 3), pref * np.cos(phi / 3)], axis=-1)
    dC = np.stack([y ** 2, -x * y], axis=-1) / r[..., None] ** 3
    dQ = np.stack([-2 * x * (1 - y ** 2), -2 * y * (1 - x ** 2)], axis=-1)
    return dS * (C * Q)[..., None] + dC * (S * Q)[..., None] + dQ * (S * C)[..., None]


def singular_problem() -> ManufacturedProblem:
    """Corner singularity r^(2/3) sin(2 phi/3) (1-x^2)(1-y^2) cos(phi), mu(t) = 1 + exp(-t)."""
    return ManufacturedProblem("singular", exponential_law(), _corner_u, _corner_grad)


# --- discrete quantities -----------------------------------------------------------

def _nodal(u) -> np.ndarray:
    return np.asarray(getattr(u, "values", u), dtype=float)


def element_gradients(mesh, u) -> np.ndarray:
    """Elementwise constant gradient of a P1 function, shape (nt, 2)."""
    vals = _nodal(u)
    if len(vals) != mesh.n_vertices:
        raise ValueError("function does not live on this mesh")
    return np.einsum("tk,tkd->td", vals[mesh.triangles], mesh.hat_gradients)


def scatter(mesh, local: np.ndarray) -> np.ndarray:
    """Sum elementwise contributions of shape (nt, 3) into a nodal vector."""
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def x_norm(mesh, u) -> float:
    """The energy-space norm ||grad u||_{L^2}."""
    g = element_gradients(mesh, u)
    return float(np.sqrt(np.dot(mesh.areas, np.einsum("td,td->t", g, g))))


def _cached(mesh, key, build):
    cache = mesh._cache
    if key not in cache:
        cache[key] = build()
    return cache[key]


def exact_grad_at_quadrature(prob, mesh) -> np.ndarray:
    def build():
        xq = LOAD_RULE.physical_points(mesh)
        return prob.exact_grad(xq[..., 0], xq[..., 1])
    return _cached(mesh, ("exact_grad_q", prob), build)


def load_vector(prob, mesh) -> np.ndarray:
    """Nodal load <g, phi_i> = int flux(u*) . grad phi_i, zero at boundary vertices."""
    def build():
        g = exact_grad_at_quadrature(prob, mesh)
        s = np.einsum("tqd,tqd->tq", g, g)
        flux = prob.law.mu(s)[..., None] * g
        mean_flux = np.einsum("q,tqd->td", LOAD_RULE.weights, flux)
        local = mesh.areas[:, None] * np.einsum("td,tkd->tk", mean_flux, mesh.hat_gradients)
        b = scatter(mesh, local)
        b[mesh.boundary_vertices] = 0.0
        return b
    return _cached(mesh, ("load", prob), build)


def residual_vector(prob, mesh, u) -> np.ndarray:
    """Nodal residual <F(u), phi_i>; zero at boundary vertices."""
    g = element_gradients(mesh, u)
    s = np.einsum("td,td->t", g, g)
    flux = prob.law.mu(s)[:, None] * g
    local = mesh.areas[:, None] * np.einsum("td,tkd->tk", flux, mesh.hat_gradients)
    r = scatter(mesh, local) - load_vector(prob, mesh)
    r[mesh.boundary_vertices] = 0.0
    return r


def residual_apply(prob, mesh, u, v) -> float:
    """<F(u), v> for discrete u, v on the same mesh."""
    vals = _nodal(v)
    if len(vals) != mesh.n_vertices:
        raise ValueError("test function does not live on this mesh")
    return float(np.dot(residual_vector(prob, mesh, u), vals))


def energy(prob, mesh, u) -> float:
    """H(u) = int psi(|grad u|^2) - <g, u>."""
    g = element_gradients(mesh, u)
    s = np.einsum("td,td->t", g, g)
    return float(np.dot(mesh.areas, prob.law.psi(s)) - np.dot(load_vector(prob, mesh), _nodal(u)))


def energy_decrease(prob, mesh, u_old, u_new) -> float:
    """H(u_old) - H(u_new), evaluated without subtracting two O(1) energies."""
    du = _nodal(u_new) - _nodal(u_old)
    g_old = element_gradients(mesh, u_old)
    d = element_gradients(mesh, du)
    s_old = np.einsum("td,td->t", g_old, g_old)
    ds = np.einsum("td,td->t", d, 2.0 * g_old + d)
    dpsi = prob.law.psi_increment(s_old, ds)
    return float(-np.dot(mesh.areas, dpsi) + np.dot(load_vector(prob, mesh), du))


def h1_error(prob, mesh, u) -> float:
    """||grad(u* - u)||_{L^2} by degree-5 quadrature."""
    gq = exact_grad_at_quadrature(prob, mesh)
    diff = gq - element_gradients(mesh, u)[:, None, :]
    local = np.einsum("tqd,tqd->tq", diff, diff) @ LOAD_RULE.weights
    return float(np.sqrt(np.dot(mesh.areas, local)))

"""P1 finite element space, linearized systems and their solution."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import model


class SolverError(RuntimeError):
    """Linear solver failed to reach its tolerance."""


@dataclass(eq=False)
class DofMap:
    """Interior vertices are the unknowns; boundary vertices carry the zero trace."""

    mesh: object

    @cached_property
    def interior(self) -> np.ndarray:
        return self.mesh.interior_vertices

    @cached_property
    def boundary(self) -> np.ndarray:
        return self.mesh.boundary_vertices

    @cached_property
    def equation_index(self) -> np.ndarray:
        """Equation number per vertex, -1 on the boundary."""
        idx = np.full(self.mesh.n_vertices, -1, dtype=np.int64)
        idx[self.interior] = np.arange(len(self.interior))
        return idx

    @property
    def n_dofs(self) -> int:
        return len(self.interior)

    def restrict(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float)[self.interior]

    def extend(self, x) -> np.ndarray:
        out = np.zeros(self.mesh.n_vertices)
        out[self.interior] = x
        return out


def dofmap(mesh) -> DofMap:
    return model._cached(mesh, "dofmap", lambda: DofMap(mesh))


@dataclass(eq=False)
class DiscreteFunction:
    """Nodal values of a P1 function in X_N (boundary values are forced to zero)."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ValueError("value array does not match the mesh")
        self.values[self.mesh.boundary_vertices] = 0.0

    @classmethod
    def zero(cls, mesh) -> "DiscreteFunction":
        return cls(mesh, np.zeros(mesh.n_vertices))

    @classmethod
    def interpolate(cls, mesh, f) -> "DiscreteFunction":
        v = mesh.vertices
        return cls(mesh, f(v[:, 0], v[:, 1]))

    def __sub__(self, other):
        return DiscreteFunction(self.mesh, self.values - other.values)

    def __add__(self, other):
        return DiscreteFunction(self.mesh, self.values + other.values)

    def norm(self) -> float:
        return model.x_norm(self.mesh, self.values)


@dataclass(eq=False)
class SparseSystem:
    """Interior-DOF system ``matrix @ x = rhs`` for the next iterate.

    ``correction_rhs`` is ``rhs - matrix @ u_n`` formed directly from the
    residual, so the increment can be solved for without cancellation.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    correction_rhs: np.ndarray
    dofs: DofMap


def element_matrices(mesh, coeff, rank_one=None) -> np.ndarray:
    """Local matrices  |T| (c_T grad phi_i.grad phi_j + k_T (w.grad phi_i)(w.grad phi_j)).

    ``rank_one`` is an optional pair ``(k, w)`` with per-element scalars ``k``
    and vectors ``w`` of shape (nt, 2).
    """
    G = mesh.hat_gradients
    local = np.asarray(coeff)[:, None, None] * np.einsum("tid,tjd->tij", G, G)
    if rank_one is not None:
        k, w = rank_one
        wg = np.einsum("td,tid->ti", w, G)
        local = local + k[:, None, None] * wg[:, :, None] * wg[:, None, :]
    return mesh.areas[:, None, None] * local


def assemble_matrix(mesh, local: np.ndarray) -> sp.csr_matrix:
    dm = dofmap(mesh)
    eq = dm.equation_index[mesh.triangles]
    rows = np.repeat(eq, 3, axis=1).ravel()
    cols = np.tile(eq, (1, 3)).ravel()
    vals = local.reshape(len(local), 9).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = dm.n_dofs
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def stiffness(mesh, coeff=1.0) -> sp.csr_matrix:
    """Interior Laplacian, optionally weighted by a per-element coefficient."""
    c = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_elements,))
    return assemble_matrix(mesh, element_matrices(mesh, c))


def laplacian(mesh) -> sp.csr_matrix:
    return model._cached(mesh, "laplacian", lambda: stiffness(mesh))


def _scheme_matrix(scheme, prob, mesh, u_n) -> tuple[sp.csr_matrix, float]:
    """The bilinear form a(u_n; ., .) and the factor multiplying -F(u_n) on the right."""
    kind = scheme.kind
    if kind == "zarantonello":
        return laplacian(mesh) / scheme.delta, 1.0
    g = model.element_gradients(mesh, u_n)
    s = np.einsum("td,td->t", g, g)
    mu = prob.law.mu(s)
    if kind == "kacanov":
        return stiffness(mesh, mu), 1.0
    if kind == "newton":
        local = element_matrices(mesh, mu, rank_one=(2.0 * prob.law.mu_prime(s), g))
        return assemble_matrix(mesh, local), scheme.delta
    raise ValueError(f"unknown scheme {kind!r}")


def assemble(scheme, prob, mesh, u_n) -> SparseSystem:
    """Linear system a(u_n; u_next, w) = <f(u_n), w> for the given scheme.

    Zarantonello: a = (1/delta) (grad, grad), f = a u_n - F(u_n).
    Kacanov:      a = (mu(|grad u_n|^2) grad, grad), f = g.
    Newton:       a = F'(u_n), f = a u_n - delta F(u_n).
    """
    dm = dofmap(mesh)
    A, damping = _scheme_matrix(scheme, prob, mesh, u_n)
    x_n = dm.restrict(getattr(u_n, "values", u_n))
    corr = -damping * dm.restrict(model.residual_vector(prob, mesh, u_n))
    if scheme.kind == "kacanov":
        rhs = dm.restrict(model.load_vector(prob, mesh))
    else:
        rhs = A @ x_n + corr
    return SparseSystem(A, rhs, corr, dm)


def solve(system, guess=None, rtol=1e-12, maxiter=None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients.

    Accepts a :class:`SparseSystem` or a ``(matrix, rhs)`` pair. Stops once
    ``||b - A x|| <= rtol ||b||``; raises :class:`SolverError` after
    ``maxiter`` (default ``10 n``) iterations.
    """
    if isinstance(system, SparseSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = system
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxiter = 10 * n if maxiter is None else maxiter
    x = np.zeros(n) if guess is None else np.array(guess, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    inv_diag = 1.0 / A.diagonal()
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    target = rtol * bnorm
    for _ in range(maxiter + 1):
        if np.linalg.norm(r) <= target:
            return x
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise SolverError(f"matrix not positive definite (p.Ap = {pAp:.3e})")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG stalled: relative residual {np.linalg.norm(r) / bnorm:.3e} after {maxiter} iterations")


def scheme_constants(scheme, law) -> tuple[float, float]:
    """Coercivity and continuity constants (alpha, beta) of a(u; ., .)."""
    if scheme.kind == "zarantonello":
        return 1.0 / scheme.delta, 1.0 / scheme.delta
    if scheme.kind == "kacanov":
        return law.mu_min, law.mu_max
    if scheme.kind == "newton":
        # flux Jacobian eigenvalues are mu(s) and mu(s) + 2 s mu'(s); damping scales a by 1/delta
        return min(law.mu_min, law.m_mu) / scheme.delta, max(law.mu_max, law.M_mu) / scheme.delta
    raise ValueError(f"unknown scheme {scheme.kind!r}")

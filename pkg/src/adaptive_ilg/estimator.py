"""Residual error indicators and Doerfler marking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .quadrature import rule


@dataclass
class IndicatorField:
    """Squared local indicators eta(T, u)^2 and the global value eta(u)."""

    squared: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sqrt(self.squared.sum()))

    def __len__(self):
        return len(self.squared)


def volume_term(prob, mesh) -> np.ndarray:
    """h_T^2 ||g||_T^2 per element (depends on the mesh only, so it is cached)."""
    def build():
        quad = rule(5)
        xq = quad.physical_points(mesh)
        h = mesh.diameters
        g = prob.g_pointwise(xq[..., 0], xq[..., 1], h=np.broadcast_to(h[:, None], xq.shape[:2]))
        return h ** 2 * mesh.areas * ((g * g) @ quad.weights)
    return model._cached(mesh, ("g_term", prob), build)


def jump_term(prob, mesh, u) -> np.ndarray:
    """h_T ||[mu(|grad u|^2) grad u]||^2 over the interior edges of each element."""
    grad = model.element_gradients(mesh, u)
    s = np.einsum("td,td->t", grad, grad)
    flux = prob.law.mu(s)[:, None] * grad
    nb = mesh.edge_neighbors
    interior = nb[:, 1] >= 0
    e = mesh.edges[interior]
    left, right = nb[interior, 0], nb[interior, 1]
    tangent = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
    length = np.linalg.norm(tangent, axis=1)
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / length[:, None]
    jump = np.einsum("ed,ed->e", flux[left] - flux[right], normal)
    edge_sq = length * jump ** 2
    per_element = (np.bincount(left, edge_sq, minlength=mesh.n_elements)
                   + np.bincount(right, edge_sq, minlength=mesh.n_elements))
    return mesh.diameters * per_element


def estimate(prob, mesh, u) -> IndicatorField:
    """eta(T, u)^2 = h_T^2 ||g||_T^2 + h_T ||[flux]||^2_{dT minus boundary}."""
    return IndicatorField(volume_term(prob, mesh) + jump_term(prob, mesh, u))


def mark(indicators, theta: float) -> np.ndarray:
    """Minimal greedy Doerfler set carrying a theta fraction of eta^2.

    ``theta == 0`` marks every element. Ties go to the lower element index.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    sq = np.asarray(getattr(indicators, "squared", indicators), dtype=float)
    if theta == 0.0:
        return np.arange(len(sq))
    order = np.argsort(-sq, kind="stable")
    cumulative = np.cumsum(sq[order])
    target = theta * cumulative[-1]
    count = int(np.searchsorted(cumulative, target, side="left")) + 1
    return np.sort(order[:min(count, len(sq))])

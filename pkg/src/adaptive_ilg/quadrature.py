"""Symmetric quadrature rules on triangles in barycentric form."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), sum to one
    degree: int

    def physical_points(self, mesh, elements=None) -> np.ndarray:
        """Quadrature points mapped to each element, shape (nt, nq, 2)."""
        tri = mesh.triangles if elements is None else mesh.triangles[elements]
        corners = mesh.vertices[tri]  # (nt, 3, 2)
        return np.einsum("qk,tkd->tqd", self.points, corners)


@lru_cache(maxsize=None)
def rule(degree: int) -> QuadRule:
    """Return the rule exact for polynomials of total degree ``degree`` (1, 2 or 5).

    All points lie strictly inside the triangle.
    """
    if degree == 1:
        pts = np.array([[1 / 3, 1 / 3, 1 / 3]])
        w = np.array([1.0])
    elif degree == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
    elif degree == 5:
        s15 = np.sqrt(15.0)
        a1, b1 = (9 - 2 * s15) / 21, (6 + s15) / 21
        a2, b2 = (9 + 2 * s15) / 21, (6 - s15) / 21
        w1, w2 = (155 + s15) / 1200, (155 - s15) / 1200
        pts = np.array([
            [1 / 3, 1 / 3, 1 / 3],
            [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
            [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
        ])
        w = np.array([9 / 40, w1, w1, w1, w2, w2, w2])
    else:
        raise ValueError(f"unsupported quadrature degree {degree}; choose 1, 2 or 5")
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, degree)


def integrate(mesh, element: int, f, quad: QuadRule) -> float:
    """Integrate the pointwise function ``f(x, y)`` over one element."""
    xq = quad.physical_points(mesh, [element])[0]
    vals = np.asarray(f(xq[:, 0], xq[:, 1]), dtype=float)
    return float(mesh.areas[element] * np.dot(quad.weights, vals))


def integrate_all(mesh, f, quad: QuadRule) -> np.ndarray:
    """Per-element integrals of ``f(x, y)`` (vectorized over elements)."""
    xq = quad.physical_points(mesh)
    vals = np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float)
    return mesh.areas * (vals @ quad.weights)

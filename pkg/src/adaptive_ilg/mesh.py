"""Conforming triangulations with newest-vertex-bisection refinement.

Triangles are stored as vertex-index triples ``(a, b, c)`` in counter-clockwise
order. The edge opposite the first vertex, ``(b, c)``, is the refinement edge,
so ``a`` plays the role of the newest vertex.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class MeshError(ValueError):
    """Raised for invalid meshes or refinement requests."""


@dataclass(eq=False)
class Triangulation:
    """A conforming triangle mesh.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, refinement edge opposite column 0
    generation : (nt,) int array of bisection depths
    midpoint_parents : (nv - n_coarse, 2) int array
        Endpoints of the coarse edge each appended vertex bisects. Empty for
        meshes that were not produced by :func:`refine`.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    generation: np.ndarray | None = None
    midpoint_parents: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if self.generation is None:
            self.generation = np.zeros(len(self.triangles), dtype=np.int64)
        if self.midpoint_parents is None:
            self.midpoint_parents = np.zeros((0, 2), dtype=np.int64)
        if np.any(self.signed_areas <= 0.0):
            bad = np.flatnonzero(self.signed_areas <= 0.0)
            raise MeshError(f"non-positive triangle area at elements {bad[:10].tolist()}")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def hat_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric hat functions, shape (nt, 3, 2)."""
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        det = 2.0 * self.signed_areas
        g = np.empty((self.n_elements, 3, 2))
        g[:, 0, 0] = y[:, 1] - y[:, 2]
        g[:, 0, 1] = x[:, 2] - x[:, 1]
        g[:, 1, 0] = y[:, 2] - y[:, 0]
        g[:, 1, 1] = x[:, 0] - x[:, 2]
        g[:, 2, 0] = y[:, 0] - y[:, 1]
        g[:, 2, 1] = x[:, 1] - x[:, 0]
        return g / det[:, None, None]

    @cached_property
    def _edge_data(self):
        t = self.triangles
        # local edge k is opposite local vertex k
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, shape (ne, 2)."""
        return self._edge_data[0]

    @property
    def element_edges(self) -> np.ndarray:
        """Edge index of local edge k (opposite vertex k), shape (nt, 3)."""
        return self._edge_data[1]

    @property
    def edge_counts(self) -> np.ndarray:
        return self._edge_data[2]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return self.edges[self.edge_counts == 1]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    @cached_property
    def edge_neighbors(self) -> np.ndarray:
        """The (up to) two elements adjacent to each edge; -1 marks the boundary side."""
        ne = len(self.edges)
        nb = np.full((ne, 2), -1, dtype=np.int64)
        flat = self.element_edges.ravel()
        elem = np.repeat(np.arange(self.n_elements), 3)
        order = np.argsort(flat, kind="stable")
        flat, elem = flat[order], elem[order]
        first = np.ones(len(flat), dtype=bool)
        first[1:] = flat[1:] != flat[:-1]
        nb[flat[first], 0] = elem[first]
        nb[flat[~first], 1] = elem[~first]
        return nb

    @cached_property
    def diameters(self) -> np.ndarray:
        """Longest edge length per element."""
        p = self.vertices[self.triangles]
        lengths = np.stack(
            [np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
             np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
             np.linalg.norm(p[:, 0] - p[:, 1], axis=1)], axis=1)
        return lengths.max(axis=1)

    def check_conformity(self) -> None:
        """Raise :class:`MeshError` unless every edge has one or two elements."""
        if np.any(self.edge_counts > 2):
            raise MeshError("edge shared by more than two triangles")
        # A hanging node shows up as a vertex lying in the interior of a boundary edge.
        be = self.boundary_edges
        a, b = self.vertices[be[:, 0]], self.vertices[be[:, 1]]
        mid = 0.5 * (a + b)
        lookup = {tuple(np.round(v, 12)) for v in self.vertices}
        hanging = [i for i, m in enumerate(mid) if tuple(np.round(m, 12)) in lookup]
        if hanging:
            raise MeshError(f"{len(hanging)} hanging nodes detected")


def make_lshape_initial() -> Triangulation:
    """Criss-cross mesh of (-1,1)^2 minus [0,1]x[-1,0] with 192 triangles.

    The 8x8 grid of side-0.25 squares loses the 16 squares of the removed
    quadrant; each remaining square is split into four triangles around its
    center, with the square side as refinement edge.
    """
    h = 0.25
    grid = np.linspace(-1.0, 1.0, 9)
    index = {}
    verts = []
    for j, y in enumerate(grid):
        for i, x in enumerate(grid):
            if x > 0 and y < 0:
                continue
            index[i, j] = len(verts)
            verts.append((x, y))
    tris = []
    for j in range(8):
        for i in range(8):
            x0, y0 = grid[i], grid[j]
            if x0 >= 0 and y0 < 0:
                continue
            c = len(verts)
            verts.append((x0 + h / 2, y0 + h / 2))
            sw, se = index[i, j], index[i + 1, j]
            ne, nw = index[i + 1, j + 1], index[i, j + 1]
            tris += [(c, sw, se), (c, se, ne), (c, ne, nw), (c, nw, sw)]
    return Triangulation(np.array(verts), np.array(tris))


def refine(mesh: Triangulation, marked) -> Triangulation:
    """Newest-vertex bisection of the marked elements plus conforming closure.

    Every marked element is bisected at least once. Edges of marked elements'
    refinement edges are flagged, then the flag propagates: an element with any
    flagged edge also flags its own refinement edge. Elements are then split
    into 2, 3 or 4 children depending on which of their edges are flagged.
    """
    marked = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked,
                                  dtype=np.int64))
    if marked.size == 0:
        raise MeshError("refine called with an empty marked set")
    if marked[0] < 0 or marked[-1] >= mesh.n_elements:
        raise MeshError("marked element index out of range")

    el_edges = mesh.element_edges
    flagged = np.zeros(len(mesh.edges), dtype=bool)
    flagged[el_edges[marked, 0]] = True
    for _ in range(mesh.n_elements + 1):
        touched = flagged[el_edges].any(axis=1)
        new = touched & ~flagged[el_edges[:, 0]]
        if not new.any():
            break
        flagged[el_edges[new, 0]] = True
    else:
        raise MeshError("refinement closure did not terminate")

    nv = mesh.n_vertices
    edge_ids = np.flatnonzero(flagged)
    mid_index = np.full(len(mesh.edges), -1, dtype=np.int64)
    mid_index[edge_ids] = nv + np.arange(len(edge_ids))
    parents = mesh.edges[edge_ids]
    new_vertices = np.vstack([mesh.vertices, 0.5 * mesh.vertices[parents].sum(axis=1)])

    t = mesh.triangles
    gen = mesh.generation
    f = flagged[el_edges]
    m0, m1, m2 = (mid_index[el_edges[:, k]] for k in range(3))
    a, b, c = t[:, 0], t[:, 1], t[:, 2]

    keep = ~f[:, 0]
    with1 = f[:, 0] & f[:, 1]
    with2 = f[:, 0] & f[:, 2]

    pieces = [t[keep]]
    gens = [gen[keep]]
    # first bisection: (a,b,c) -> (m0,a,b), (m0,c,a)
    s = f[:, 0] & ~f[:, 2]
    pieces.append(np.stack([m0[s], a[s], b[s]], axis=1))
    gens.append(gen[s] + 1)
    s = f[:, 0] & ~f[:, 1]
    pieces.append(np.stack([m0[s], c[s], a[s]], axis=1))
    gens.append(gen[s] + 1)
    # (m0,a,b) has refinement edge (a,b) = local edge 2 of the parent
    s = with2
    pieces.append(np.stack([m2[s], m0[s], a[s]], axis=1))
    pieces.append(np.stack([m2[s], b[s], m0[s]], axis=1))
    gens += [gen[s] + 2, gen[s] + 2]
    # (m0,c,a) has refinement edge (c,a) = local edge 1 of the parent
    s = with1
    pieces.append(np.stack([m1[s], m0[s], c[s]], axis=1))
    pieces.append(np.stack([m1[s], a[s], m0[s]], axis=1))
    gens += [gen[s] + 2, gen[s] + 2]

    return Triangulation(new_vertices, np.vstack(pieces), np.concatenate(gens), parents)


def prolong(values: np.ndarray, fine: Triangulation) -> np.ndarray:
    """Interpolate nodal values from the parent mesh onto ``fine`` (exact for P1)."""
    values = np.asarray(values, dtype=float)
    parents = fine.midpoint_parents
    if len(values) + len(parents) != fine.n_vertices:
        raise MeshError("values do not belong to the parent of this mesh")
    return np.concatenate([values, 0.5 * values[parents].sum(axis=1)])


def min_angle(mesh: Triangulation) -> float:
    """Smallest interior angle over all elements, in radians."""
    p = mesh.vertices[mesh.triangles]
    angles = []
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
    return float(np.min(angles))


def write_mesh(mesh: Triangulation, path) -> None:
    """Plain-text dump: ``nv nt``, vertices, ``i j k refedge`` rows, boundary edges."""
    lines = [f"{mesh.n_vertices} {mesh.n_elements}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k} 0" for i, j, k in mesh.triangles]
    lines += [f"{i} {j}" for i, j in mesh.boundary_edges]
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_mesh(path) -> Triangulation:
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip()]
    nv, nt = int(rows[0][0]), int(rows[0][1])
    verts = np.array(rows[1:1 + nv], dtype=float)
    tri = np.array(rows[1 + nv:1 + nv + nt], dtype=np.int64)
    # rotate each row so the stored refinement edge sits opposite column 0
    shift = tri[:, 3]
    tri = np.array([np.roll(r[:3], -s) for r, s in zip(tri, shift)], dtype=np.int64)
    return Triangulation(verts, tri)

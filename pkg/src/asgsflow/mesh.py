"""Uniform right-triangle meshes of the unit square."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class StructuredTriMesh:
    """P1 triangulation of (0,1)x(0,1) with ``n_div`` cells per side.

    Nodes are numbered lexicographically by (y, x): node ``j*(n_div+1) + i``
    sits at ``(i/n_div, j/n_div)``. Every square cell is cut by its
    lower-left to upper-right diagonal and triangles are counterclockwise.
    """

    n_div: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    pattern: str = "diagonal"
    # derived per-element geometry, filled in __post_init__
    jacobians: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)
    grads: np.ndarray = field(init=False, repr=False)
    h_k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = self.nodes[self.triangles]
        jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(det <= 0.0):
            raise ValueError("mesh contains degenerate or inverted triangles")
        inv_t = np.linalg.inv(jac).transpose(0, 2, 1)
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        grads = np.einsum("kab,ib->kia", inv_t, ref)
        edges = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)
        h_k = np.sqrt((edges**2).sum(axis=2)).max(axis=1)
        for name, value in (("jacobians", jac), ("areas", 0.5 * det), ("grads", grads), ("h_k", h_k)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    @property
    def h(self) -> float:
        """Largest element diameter."""
        return float(self.h_k.max())

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    def element_geometry(self, k: int):
        """Return ``(vertices, area, jacobian, h_k)`` of triangle ``k``.

        The jacobian maps reference coordinates (xi, eta) to physical ones:
        ``x = v0 + J @ (xi, eta)``.
        """
        if not 0 <= k < self.n_elements:
            raise IndexError(f"triangle index {k} out of range [0, {self.n_elements})")
        return self.nodes[self.triangles[k]], float(self.areas[k]), self.jacobians[k], float(self.h_k[k])

    def to_physical(self, k: int, ref_points) -> np.ndarray:
        """Map reference points of shape (m, 2) onto triangle ``k``."""
        verts, _, jac, _ = self.element_geometry(k)
        return verts[0] + np.asarray(ref_points, dtype=float) @ jac.T

    def dump(self, path) -> None:
        """Plain-text dump: one "x y" line per node then one "i j k" line per triangle."""
        with open(path, "w") as fh:
            for x, y in self.nodes:
                fh.write(f"{float(x)!r} {float(y)!r}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")


DIAGONAL = "diagonal"
ALTERNATING = "alternating"
PATTERNS = (DIAGONAL, ALTERNATING)


def build_unit_square_mesh(n_div: int, pattern: str = DIAGONAL) -> StructuredTriMesh:
    """Uniform triangulation with ``2*n_div**2`` right triangles.

    ``pattern="diagonal"`` cuts every cell from lower-left to upper-right.
    ``pattern="alternating"`` flips the cut (lower-right to upper-left) in
    cells with odd ``i + j``; for even ``n_div`` every corner node then
    touches an interior node, which pure Galerkin equal-order pairs need.
    """
    if int(n_div) != n_div or n_div < 1:
        raise ValueError(f"n_div must be a positive integer, got {n_div!r}")
    if pattern not in PATTERNS:
        raise ValueError(f"unknown mesh pattern {pattern!r}")
    n_div = int(n_div)
    m = n_div + 1
    coords = np.arange(m) / n_div
    xx, yy = np.meshgrid(coords, coords)  # row index j is y
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(n_div), np.arange(n_div))
    ll = (j * m + i).ravel()
    lr, ul, ur = ll + 1, ll + m, ll + m + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    if pattern == ALTERNATING:
        flip = ((i + j) % 2 == 1).ravel()
        lower = np.where(flip[:, None], np.column_stack([ll, lr, ul]), lower)
        upper = np.where(flip[:, None], np.column_stack([lr, ur, ul]), upper)
    triangles = np.empty((2 * n_div * n_div, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    ix, iy = np.arange(m * m) % m, np.arange(m * m) // m
    on_bnd = (ix == 0) | (ix == n_div) | (iy == 0) | (iy == n_div)
    boundary = np.flatnonzero(on_bnd)
    for arr in (nodes, triangles, boundary):
        arr.setflags(write=False)
    return StructuredTriMesh(n_div, nodes, triangles, boundary, pattern)


def nominal_h(n_div: int) -> float:
    return math.sqrt(2.0) / n_div

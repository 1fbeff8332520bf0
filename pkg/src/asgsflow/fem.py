"""P1 reference element, triangle quadrature and element-level helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import StructuredTriMesh

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # barycentric, shape (nq, 3)
    weights: np.ndarray  # sum to the reference area 1/2
    exactness_degree: int

    @property
    def ref_points(self) -> np.ndarray:
        """Points in (xi, eta) reference coordinates."""
        return self.points[:, 1:]


def shape_functions(ref_points) -> np.ndarray:
    """Values of N1, N2, N3 at reference points, shape (m, 3)."""
    pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
    xi, eta = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


def _orbit3(a: float) -> list:
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _build_rules():
    rules = {}
    rules[1] = QuadratureRule(np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([0.5]), 1)
    rules[2] = QuadratureRule(np.array(_orbit3(1 / 6)), np.full(3, 1 / 6), 2)
    # Dunavant 6-point rule, degree 4
    pts = _orbit3(0.445948490915965) + _orbit3(0.091576213509771)
    w = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3) * 0.5
    rules[4] = QuadratureRule(np.array(pts), w, 4)
    # no positive-weight rule cheaper than the 6-point one is worth keeping for degree 3
    rules[3] = rules[4]
    return rules


_RULES = _build_rules()


def quadrature(degree: int) -> QuadratureRule:
    """Positive-weight triangle rule exact at least up to ``degree``."""
    try:
        return _RULES[degree]
    except KeyError:
        raise ValueError(f"unsupported quadrature degree {degree!r}; choose 1-4") from None


def physical_gradients(jacobian, ref_gradients=REF_GRADIENTS) -> np.ndarray:
    jac = np.asarray(jacobian, dtype=float)
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if abs(det) < 1e-300:
        raise np.linalg.LinAlgError("singular element jacobian")
    return ref_gradients @ np.linalg.inv(jac)


class ElementQuadrature:
    """Quadrature points, weights and basis values for every element of a mesh.

    ``dx`` has shape (nel, nq) and already includes the jacobian determinant,
    so ``(values * dx).sum()`` integrates a field sampled at ``points``.
    """

    def __init__(self, mesh: StructuredTriMesh, degree: int = 4):
        rule = quadrature(degree)
        self.mesh = mesh
        self.rule = rule
        self.phi = shape_functions(rule.ref_points)  # (nq, 3)
        verts = mesh.nodes[mesh.triangles]  # (nel, 3, 2)
        self.points = np.einsum("qi,kia->kqa", self.phi, verts)
        self.dx = 2.0 * mesh.areas[:, None] * rule.weights[None, :]
        self.grads = mesh.grads  # (nel, 3, 2)

    @property
    def x(self):
        return self.points[..., 0]

    @property
    def y(self):
        return self.points[..., 1]

    def values(self, nodal) -> np.ndarray:
        """P1 field at quadrature points, shape (nel, nq)."""
        return np.asarray(nodal)[self.mesh.triangles] @ self.phi.T

    def gradient(self, nodal) -> np.ndarray:
        """Elementwise constant gradient of a P1 field, shape (nel, 2)."""
        return np.einsum("ki,kia->ka", np.asarray(nodal)[self.mesh.triangles], self.grads)

    def integrate(self, values) -> float:
        return float((np.asarray(values) * self.dx).sum())


def mass_matrix(mesh: StructuredTriMesh) -> sp.csr_matrix:
    """Consistent scalar P1 mass matrix."""
    local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    data = mesh.areas[:, None, None] * local[None]
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    n = mesh.n_nodes
    return sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def stiffness_matrix(mesh: StructuredTriMesh) -> sp.csr_matrix:
    local = np.einsum("kia,kja->kij", mesh.grads, mesh.grads) * mesh.areas[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    n = mesh.n_nodes
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def l2_project(mesh: StructuredTriMesh, func, zero_boundary: bool = False, degree: int = 4) -> np.ndarray:
    """Nodal values of the L2 projection of ``func(x, y)`` onto P1.

    With ``zero_boundary`` the projection is onto P1 functions vanishing on
    the boundary.
    """
    from scipy.sparse.linalg import spsolve

    eq = ElementQuadrature(mesh, degree)
    fq = func(eq.x, eq.y)
    load = np.zeros(mesh.n_nodes)
    np.add.at(load, mesh.triangles, np.einsum("kq,qi->ki", fq * eq.dx, eq.phi))
    mass = mass_matrix(mesh)
    out = np.zeros(mesh.n_nodes)
    if zero_boundary:
        free = ~mesh.boundary_mask
        if free.any():
            out[free] = spsolve(mass[free][:, free].tocsc(), load[free])
    else:
        out[:] = spsolve(mass.tocsc(), load)
    return out


def interpolate(mesh: StructuredTriMesh, func) -> np.ndarray:
    return np.asarray(func(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)


def interpolation_errors(mesh: StructuredTriMesh, func, grad, degree: int = 4):
    """L2 and H1 (full) norms of ``func - I_h func``."""
    eq = ElementQuadrature(mesh, degree)
    nodal = interpolate(mesh, func)
    ev = func(eq.x, eq.y) - eq.values(nodal)
    gx, gy = grad(eq.x, eq.y)
    gh = eq.gradient(nodal)
    eg = (gx - gh[:, 0:1]) ** 2 + (gy - gh[:, 1:2]) ** 2
    l2sq = eq.integrate(ev**2)
    return np.sqrt(l2sq), np.sqrt(l2sq + eq.integrate(eg))

"""Monolithic assembly of one theta-scheme step for the coupled flow/transport system.

Unknowns are interleaved per node as (u1, u2, p, c); global dof of field
``s`` at node ``n`` is ``4*n + s``. Within an element the local dof of
field ``s`` at local vertex ``i`` is ``4*i + s``.

The step is linear: the advecting velocity, the viscosity argument and the
stabilization parameters are taken from a lagged state (by default U^n).
P1 fields have no second derivatives inside an element, so every
Laplacian in the strong operators is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import stabilization as stab
from .fem import ElementQuadrature
from .mesh import StructuredTriMesh
from .models import PhysicalParams

NFIELDS = 4
U1, U2, P, C = range(NFIELDS)
GALERKIN = "galerkin"
ASGS = "asgs"
METHODS = (GALERKIN, ASGS)


@dataclass
class CoupledState:
    u1: np.ndarray
    u2: np.ndarray
    p: np.ndarray
    c: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, n_nodes: int, t: float = 0.0) -> "CoupledState":
        return cls(*(np.zeros(n_nodes) for _ in range(NFIELDS)), t=t)

    @classmethod
    def from_vector(cls, x, t: float) -> "CoupledState":
        x = np.asarray(x, dtype=float).reshape(-1, NFIELDS)
        return cls(*(x[:, s].copy() for s in range(NFIELDS)), t=t)

    def vector(self) -> np.ndarray:
        return np.column_stack([self.u1, self.u2, self.p, self.c]).ravel()

    @property
    def velocity(self) -> np.ndarray:
        return np.column_stack([self.u1, self.u2])

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in (self.u1, self.u2, self.p, self.c))


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    fixed_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fixed_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # quadrature-point residual R = rop @ X_local + r0, kept for the subscale history
    rop: Optional[np.ndarray] = field(default=None, repr=False)
    r0: Optional[np.ndarray] = field(default=None, repr=False)
    stab_params: Optional[stab.StabParams] = field(default=None, repr=False)
    # per-element (nel, 4) series factors of d and the ASGS term weights
    series: Optional[np.ndarray] = field(default=None, repr=False)
    weights: Optional[dict] = field(default=None, repr=False)
    # (nel, 4) one-step decay of the tracked subscale history, None otherwise
    decay: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]


class Assembler:
    """Per-mesh precomputation shared by every step on that mesh."""

    def __init__(self, mesh: StructuredTriMesh, quad_degree: int = 4):
        self.mesh = mesh
        self.eq = ElementQuadrature(mesh, quad_degree)
        tri = mesh.triangles
        self.dofmap = (NFIELDS * tri[:, :, None] + np.arange(NFIELDS)[None, None, :]).reshape(len(tri), 3 * NFIELDS)
        nloc = 3 * NFIELDS
        self._rows = np.repeat(self.dofmap, nloc, axis=1).ravel()
        self._cols = np.tile(self.dofmap, (1, nloc)).ravel()
        self.n_dofs = NFIELDS * mesh.n_nodes
        b = mesh.boundary_nodes
        self.dirichlet_dofs = np.sort(np.concatenate([NFIELDS * b + U1, NFIELDS * b + U2, NFIELDS * b + C]))

    def to_csr(self, local: np.ndarray) -> sp.csr_matrix:
        n = self.n_dofs
        return sp.coo_matrix((local.ravel(), (self._rows, self._cols)), shape=(n, n)).tocsr()

    def scatter(self, local_vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_dofs)
        np.add.at(out, self.dofmap, local_vec)
        return out

    def local(self, state: CoupledState) -> np.ndarray:
        return state.vector()[self.dofmap]


def _ensure_assembler(mesh_or_asm) -> Assembler:
    return mesh_or_asm if isinstance(mesh_or_asm, Assembler) else Assembler(mesh_or_asm)


def assemble_convection_block(mesh_or_asm, advecting, rho: float = 1.0, scalar: bool = False) -> sp.csr_matrix:
    """Matrix of the skew-symmetrized convection form c(a; u, v).

    ``advecting`` holds nodal values of a, shape (n_nodes, 2). The returned
    block acts on node-interleaved (u1, u2) values; ``scalar=True`` returns
    the per-component n x n block instead.
    """
    asm = _ensure_assembler(mesh_or_asm)
    mesh, eq = asm.mesh, asm.eq
    a_nodal = np.asarray(advecting, dtype=float)
    if a_nodal.shape != (mesh.n_nodes, 2) or not np.isfinite(a_nodal).all():
        raise ValueError("advecting velocity must be finite with shape (n_nodes, 2)")
    a_q = np.stack([eq.values(a_nodal[:, 0]), eq.values(a_nodal[:, 1])], axis=-1)
    div_a = eq.gradient(a_nodal[:, 0])[:, 0] + eq.gradient(a_nodal[:, 1])[:, 1]
    block = _convection_local(eq, a_q, div_a, rho)
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    cs = sp.coo_matrix((block.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    if scalar:
        return cs
    return sp.kron(cs, sp.identity(2), format="csr")


def _convection_local(eq, a_q, div_a, rho):
    adv = np.einsum("kqa,kja->kqj", a_q, eq.grads)  # a . grad phi_j
    mass_q = eq.phi[None, :, :] * eq.dx[:, :, None]  # (nel, nq, 3)
    conv = np.einsum("kqi,kqj->kij", mass_q, adv)
    mloc = np.einsum("kqi,qj->kij", mass_q, eq.phi)
    return rho * conv + 0.5 * rho * div_a[:, None, None] * mloc


@dataclass
class LaggedCoefficients:
    a_q: np.ndarray  # (nel, nq, 2)
    div_a: np.ndarray  # (nel,)
    mu_q: np.ndarray  # (nel, nq)
    d1_q: np.ndarray
    d2_q: np.ndarray


def lagged_coefficients(asm: Assembler, lag: CoupledState, params: PhysicalParams, t_eval: float) -> LaggedCoefficients:
    eq = asm.eq
    a_q = np.stack([eq.values(lag.u1), eq.values(lag.u2)], axis=-1)
    div_a = eq.gradient(lag.u1)[:, 0] + eq.gradient(lag.u2)[:, 1]
    mu_q = np.asarray(params.viscosity(eq.values(lag.c)), dtype=float)
    d1, d2 = params.diffusion(eq.x, eq.y, t_eval)
    coeffs = LaggedCoefficients(a_q, div_a, mu_q, np.asarray(d1, float), np.asarray(d2, float))
    for name in ("a_q", "div_a", "mu_q", "d1_q", "d2_q"):
        if not np.isfinite(getattr(coeffs, name)).all():
            raise FloatingPointError(f"non-finite lagged coefficient {name}")
    return coeffs


def element_tau(asm: Assembler, lag: CoupledState, coeffs: LaggedCoefficients, params: PhysicalParams, config: stab.StabConfig):
    """Per-element (tau1, tau2, tau3) from the lagged state."""
    mesh = asm.mesh
    vel = lag.velocity[mesh.triangles].mean(axis=1)
    u_norm = np.sqrt((vel**2).sum(axis=1))
    mu_u = coeffs.mu_q.max(axis=1)
    d_loc = np.maximum(coeffs.d1_q, coeffs.d2_q).mean(axis=1)
    return stab.compute_tau(mesh.h_k, mu_u, u_norm, d_loc, params.alpha, params.rho, config.c1, config.c2, config.c3)


def galerkin_blocks(asm: Assembler, coeffs: LaggedCoefficients, params: PhysicalParams):
    """Local (nel, 12, 12) mass and spatial-operator matrices of the Galerkin form."""
    eq = asm.eq
    nel = asm.mesh.n_elements
    g = eq.grads
    mass_q = eq.phi[None, :, :] * eq.dx[:, :, None]
    mloc = np.einsum("kqi,qj->kij", mass_q, eq.phi)
    conv = _convection_local(eq, coeffs.a_q, coeffs.div_a, params.rho)
    visc = np.einsum("kq,kia,kja->kij", coeffs.mu_q * eq.dx, g, g)
    diff = (np.einsum("kq,ki,kj->kij", coeffs.d1_q * eq.dx, g[:, :, 0], g[:, :, 0])
            + np.einsum("kq,ki,kj->kij", coeffs.d2_q * eq.dx, g[:, :, 1], g[:, :, 1]))
    adv = np.einsum("kqi,kqj->kij", mass_q, np.einsum("kqa,kja->kqj", coeffs.a_q, g))
    phi_int = mass_q.sum(axis=1)  # integral of phi_i, (nel, 3)

    mass = np.zeros((nel, 12, 12))
    oper = np.zeros((nel, 12, 12))
    mass[:, U1::4, U1::4] = params.rho * mloc
    mass[:, U2::4, U2::4] = params.rho * mloc
    mass[:, C::4, C::4] = mloc
    for m in (U1, U2):
        oper[:, m::4, m::4] = conv + visc
        # -b(v, p): -int div(v) p
        oper[:, m::4, P::4] = -g[:, :, m][:, :, None] * phi_int[:, None, :]
        # b(u, q): int div(u) q
        oper[:, P::4, m::4] = phi_int[:, :, None] * g[:, :, m][:, None, :]
    oper[:, C::4, C::4] = diff + adv + params.alpha * mloc
    return mass, oper


def strong_operators(asm: Assembler, coeffs: LaggedCoefficients, params: PhysicalParams):
    """Pointwise strong operators acting on local dofs.

    Returns ``(lop, tm, lstar, vop)`` with shapes (nel, nq, 4, 12) or
    (nq, 4, 12): ``lop`` is L(a; U) with Laplacians dropped, ``tm`` the mass
    M U, ``lstar`` is -L*(a; V) and ``vop`` the plain values of V.
    """
    eq = asm.eq
    nel, nq = eq.dx.shape
    g = eq.grads
    rho, alpha = params.rho, params.alpha
    adv = np.einsum("kqa,kja->kqj", coeffs.a_q, g)  # (nel, nq, 3)
    gx = np.broadcast_to(g[:, None, :, 0], (nel, nq, 3))
    gy = np.broadcast_to(g[:, None, :, 1], (nel, nq, 3))
    phi = np.broadcast_to(eq.phi[None], (nel, nq, 3))

    lop = np.zeros((nel, nq, NFIELDS, 12))
    lop[:, :, U1, U1::4] = rho * adv
    lop[:, :, U1, P::4] = gx
    lop[:, :, U2, U2::4] = rho * adv
    lop[:, :, U2, P::4] = gy
    lop[:, :, P, U1::4] = gx
    lop[:, :, P, U2::4] = gy
    lop[:, :, C, C::4] = adv + alpha * phi
    lstar = lop.copy()
    lstar[:, :, C, C::4] = adv - alpha * phi

    tm = np.zeros((nq, NFIELDS, 12))
    tm[:, U1, U1::4] = rho * eq.phi
    tm[:, U2, U2::4] = rho * eq.phi
    tm[:, C, C::4] = eq.phi
    vop = np.zeros((nq, NFIELDS, 12))
    for s in range(NFIELDS):
        vop[:, s, s::4] = eq.phi
    return lop, tm, lstar, vop


def forcing_at_quadrature(asm: Assembler, forcing: Optional[Callable], t: float) -> np.ndarray:
    """F = (f1, f2, 0, g) at quadrature points, shape (nel, nq, 4)."""
    eq = asm.eq
    out = np.zeros(eq.dx.shape + (NFIELDS,))
    if forcing is not None:
        f1, f2, gg = forcing(eq.x, eq.y, t)
        out[..., U1], out[..., U2], out[..., C] = f1, f2, gg
    return out


def _weighted_gram(left, weights, right):
    """sum_{q,r} left[e,q,r,i] * weights[e,q,r] * right[e,q,r,j]."""
    nel = weights.shape[0]
    lw = (left * weights[..., None]).reshape(nel, -1, left.shape[-1])
    rr = np.broadcast_to(right, (nel,) + right.shape[-3:]).reshape(nel, -1, right.shape[-1])
    return np.matmul(lw.transpose(0, 2, 1), rr)


def assemble_step(mesh_or_asm, state_n: CoupledState, dt: float, theta: float, params: PhysicalParams,
                  stab_config: Optional[stab.StabConfig] = None, method: str = ASGS,
                  forcing: Optional[Callable] = None, lag_state: Optional[CoupledState] = None,
                  pressure_penalty: float = 0.0, history: Optional[np.ndarray] = None) -> SparseSystem:
    """Assemble the linear system whose solution is U^{n+1}.

    ``forcing(x, y, t) -> (f1, f2, g)`` is sampled at t^{n,theta}.
    ``pressure_penalty`` adds eps*(p, q) to the continuity rows; pure
    Galerkin with equal-order P1 needs it to remove spurious pressure modes.

    With ``subscale_history="implicit"`` the subscale vector
    d = S (F - M dU/dt - L(u; U)) is built from the residual of the unknown
    itself, so it enters the matrix. With ``"tracked"`` (default) d is the
    known accumulation of earlier residuals passed as ``history``, shape
    (nel, nq, 4) with a zero continuity column, and only enters the rhs.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if theta not in (0, 1):
        raise ValueError("theta must be 0 (Crank-Nicolson) or 1 (backward Euler)")
    asm = _ensure_assembler(mesh_or_asm)
    stab_config = stab_config or stab.StabConfig()
    lag = lag_state if lag_state is not None else state_n
    w1, w0 = 0.5 * (1.0 + theta), 0.5 * (1.0 - theta)
    t_mid = state_n.t + w1 * dt

    coeffs = lagged_coefficients(asm, lag, params, t_mid)
    mass, oper = galerkin_blocks(asm, coeffs, params)
    if pressure_penalty:
        mloc = mass[:, C::4, C::4]
        # p^{n,theta} is the quantity penalised, consistent with the other operator terms
        oper[:, P::4, P::4] += pressure_penalty * mloc
    un = asm.local(state_n)
    fq = forcing_at_quadrature(asm, forcing, t_mid)
    eq = asm.eq

    local_k = mass / dt + w1 * oper
    local_b = np.einsum("kij,kj->ki", mass / dt - w0 * oper, un) + _load(eq, fq)

    system = SparseSystem(None, None)
    if method == ASGS:
        tau = element_tau(asm, lag, coeffs, params, stab_config)
        sp_ = stab.make_stab_params(tau, params.rho, dt, stab_config)
        lop, tm, lstar, vop = strong_operators(asm, coeffs, params)
        rop = tm[None] / dt + w1 * lop
        r0 = np.einsum("kqrj,kj->kqr", -tm[None] / dt + w0 * lop, un) - fq

        zero = np.zeros_like(sp_.tau2)
        tracked = stab_config.subscale_history == stab.TRACKED
        if tracked:
            series = np.zeros((len(zero), NFIELDS))
        else:
            s1, s3 = stab.series_factors(sp_.tau1p, sp_.tau3p, params.rho, dt, sp_.mode, stab_config.subscale_terms)
            series = np.stack([s1, s1, zero, s3], axis=1)
        taup = np.stack([sp_.tau1p, sp_.tau1p, sp_.tau2p, sp_.tau3p], axis=1)
        kappa = np.stack([sp_.kappa1, sp_.kappa1, zero, sp_.kappa3], axis=1)
        ratio = np.stack([sp_.ratio1, sp_.ratio1, np.ones_like(zero), sp_.ratio3], axis=1)

        # with R = M dU/dt + L U - F and d = -series * R:
        #   (tau'(R - d), -L*V) - ((I - tau^-1 tau') R, V) - (tau^-1 tau' d, V)
        adj_w = taup * (1.0 + series)
        val_w = -kappa + ratio * series
        w_adj = eq.dx[:, :, None] * adj_w[:, None, :]
        w_val = eq.dx[:, :, None] * val_w[:, None, :]
        vop_b = np.broadcast_to(vop, lstar.shape)
        local_k += _weighted_gram(lstar, w_adj, rop) + _weighted_gram(vop_b, w_val, rop)
        local_b -= (np.einsum("kqri,kqr->ki", lstar, w_adj * r0)
                    + np.einsum("qri,kqr->ki", vop, w_val * r0))
        if tracked and history is not None and sp_.mode == stab.DYNAMIC:
            # known d moves to the rhs: +(tau' d, -L*V) + (tau^-1 tau' d, V)
            d_w = eq.dx[:, :, None] * np.asarray(history)
            local_b += (np.einsum("kqri,kqr->ki", lstar, d_w * taup[:, None, :])
                        + np.einsum("qri,kqr->ki", vop, d_w * ratio[:, None, :]))
        x1, x3 = stab.history_ratios(sp_.tau1p, sp_.tau3p, params.rho, dt, sp_.mode)
        system.decay = np.stack([x1, x1, zero, x3], axis=1) if tracked else None
        system.rop, system.r0 = rop, r0
        system.stab_params = sp_
        system.series = series
        system.weights = {"adjoint": adj_w, "value": val_w, "kappa": kappa, "ratio": ratio, "taup": taup}

    system.matrix = asm.to_csr(local_k)
    system.rhs = asm.scatter(local_b)
    if not np.isfinite(system.matrix.data).all() or not np.isfinite(system.rhs).all():
        raise FloatingPointError("assembled system contains non-finite entries")
    return system


def _load(eq: ElementQuadrature, fq: np.ndarray) -> np.ndarray:
    # int F_r phi_i -> local dof 4*i + r
    return np.einsum("kqr,qi,kq->kir", fq, eq.phi, eq.dx).reshape(fq.shape[0], 3 * NFIELDS)


def quadrature_residual(system: SparseSystem, asm: Assembler, x_new) -> np.ndarray:
    """r = F - M dU/dt - L(u; U) at quadrature points for the solved step."""
    if system.rop is None:
        raise ValueError("system carries no residual operators (Galerkin step)")
    xl = np.asarray(x_new)[asm.dofmap]
    return -(np.einsum("kqrj,kj->kqr", system.rop, xl) + system.r0)


def advance_history(system: SparseSystem, asm: Assembler, x_new, history=None) -> np.ndarray:
    """Tracked d for the next step: decay * (r + d), with r the residual of the solved step."""
    if system.decay is None:
        raise ValueError("system does not track a subscale history")
    r = quadrature_residual(system, asm, x_new)
    if history is not None:
        r = r + history
    return system.decay[:, None, :] * r


def subscale_vector(system: SparseSystem, asm: Assembler, x_new) -> stab.SubscaleVector:
    """The subscale vector d of a solved ASGS step at quadrature points."""
    r = quadrature_residual(system, asm, x_new)
    s = system.series
    return stab.SubscaleVector(s[:, None, U1:U2 + 1] * r[..., U1:U2 + 1], s[:, None, P] * r[..., P],
                               s[:, None, C] * r[..., C])


def apply_dirichlet(system: SparseSystem, mesh_or_asm, values=None) -> SparseSystem:
    """Impose u = 0 and c = 0 on boundary nodes by symmetric elimination.

    Constrained rows and columns are zeroed, a unit diagonal is placed on the
    constrained rows and their right-hand side carries the prescribed value.
    Eliminated column contributions move to the right-hand side.
    """
    asm = _ensure_assembler(mesh_or_asm)
    fixed = asm.dirichlet_dofs
    vals = np.zeros(len(fixed)) if values is None else np.asarray(values, dtype=float)
    n = system.matrix.shape[0]
    g = np.zeros(n)
    g[fixed] = vals
    keep = np.ones(n)
    keep[fixed] = 0.0
    dk = sp.diags(keep)
    a = system.matrix
    rhs = keep * (system.rhs - a @ g) + (1.0 - keep) * g
    mat = (dk @ a @ dk + sp.diags(1.0 - keep)).tocsr()
    mat.eliminate_zeros()
    return replace(system, matrix=mat, rhs=rhs, fixed_dofs=fixed, fixed_values=vals)


def reduced_system(system: SparseSystem):
    """Matrix and rhs restricted to the unconstrained dofs, plus their indices."""
    n = system.matrix.shape[0]
    free = np.setdiff1d(np.arange(n), system.fixed_dofs)
    return system.matrix[free][:, free], system.rhs[free], free

"""Elementwise strong residuals of a discrete step and the h-weighted indicator eta."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fem import ElementQuadrature
from .mms import ExactSolution
from .models import PhysicalParams


@dataclass
class ResidualField:
    """Squared elementwise L2 norms of the momentum, continuity and transport residuals."""

    r1_sq: np.ndarray
    r2_sq: np.ndarray
    r3_sq: np.ndarray
    h_k: np.ndarray

    @property
    def r1(self):
        return np.sqrt(self.r1_sq)

    @property
    def r2(self):
        return np.sqrt(self.r2_sq)

    @property
    def r3(self):
        return np.sqrt(self.r3_sq)

    @property
    def eta_k(self) -> np.ndarray:
        return self.h_k * np.sqrt(self.r1_sq + self.r2_sq + self.r3_sq)

    @property
    def eta(self) -> float:
        return float(np.sqrt((self.h_k**2 * (self.r1_sq + self.r2_sq + self.r3_sq)).sum()))

    def components(self) -> dict:
        w = self.h_k**2
        return {name: float(np.sqrt((w * sq).sum())) for name, sq in
                (("momentum", self.r1_sq), ("continuity", self.r2_sq), ("transport", self.r3_sq))}


def compute_residuals(state_n, state_np1, theta: float, dt: float, eq: ElementQuadrature, params: PhysicalParams,
                      forcing: Optional[Callable], advecting: Optional[ExactSolution] = None) -> ResidualField:
    """Residuals of the strong equations for the step t^n -> t^{n+1}.

    Fields are the theta-combination of the two levels, time derivatives the
    difference quotient, and everything is evaluated at t^{n,theta}. P1
    velocity Laplacians vanish; the diffusion divergence keeps the
    (dD_i/dx_i)(dc/dx_i) part. ``advecting`` substitutes a known exact
    velocity in the transport residual.
    """
    w1, w0 = 0.5 * (1.0 + theta), 0.5 * (1.0 - theta)
    t = state_n.t + w1 * dt

    def mix(name):
        return w1 * getattr(state_np1, name) + w0 * getattr(state_n, name)

    def rate(name):
        return (getattr(state_np1, name) - getattr(state_n, name)) / dt

    u1, u2, p, c = (mix(k) for k in ("u1", "u2", "p", "c"))
    u1q, u2q, cq = eq.values(u1), eq.values(u2), eq.values(c)
    gu1, gu2, gp, gc = (eq.gradient(v) for v in (u1, u2, p, c))
    du1, du2, dc = (eq.values(rate(k)) for k in ("u1", "u2", "c"))
    x, y = eq.x, eq.y
    if forcing is not None:
        f1, f2, g = forcing(x, y, t)
    else:
        f1 = f2 = g = np.zeros_like(x)
    rho = params.rho

    def col(a, i):
        return a[:, i:i + 1]

    conv1 = u1q * col(gu1, 0) + u2q * col(gu1, 1)
    conv2 = u1q * col(gu2, 0) + u2q * col(gu2, 1)
    r1a = f1 - (rho * du1 + rho * conv1 + col(gp, 0))
    r1b = f2 - (rho * du2 + rho * conv2 + col(gp, 1))
    r2 = -(col(gu1, 0) + col(gu2, 1)) * np.ones_like(x)
    if advecting is not None:
        a1, a2 = advecting.velocity(x, y, t)
    else:
        a1, a2 = u1q, u2q
    d1x, d2y = params.diffusion.divergence_terms(x, y, t)
    div_flux = d1x * col(gc, 0) + d2y * col(gc, 1)
    r3 = g - (dc - div_flux + a1 * col(gc, 0) + a2 * col(gc, 1) + params.alpha * cq)

    def elem(sq):
        return (sq * eq.dx).sum(axis=1)

    return ResidualField(elem(r1a**2 + r1b**2), elem(r2**2), elem(r3**2), eq.mesh.h_k.copy())

"""Manufactured solution, its forcing terms, and space-time error norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import ElementQuadrature
from .models import PhysicalParams


def _p1(s):  # s (s-1)
    return s * (s - 1.0)


def _x1(s):  # s (s-1) (2s-1)
    return s * (s - 1.0) * (2.0 * s - 1.0)


def _x1p(s):
    return 6.0 * s * s - 6.0 * s + 1.0


def _x1pp(s):
    return 12.0 * s - 6.0


def _x2(s):  # s^2 (s-1)^2, derivative 2 x1
    return s * s * (s - 1.0) ** 2


class ExactSolution:
    """Closed-form velocity, pressure and concentration with derivatives.

    u1 = e^-t X2(x) X1(y),  u2 = -e^-t X1(x) X2(y),
    p  = e^-t (3x^2 + 3y^2 - 2),  c = e^-t x(x-1) y(y-1)
    with X1(s) = s(s-1)(2s-1) and X2(s) = s^2(s-1)^2.  Every field is
    e^-t times a polynomial, so each time derivative flips the sign.
    """

    def velocity(self, x, y, t):
        e = np.exp(-t)
        return e * _x2(x) * _x1(y), -e * _x1(x) * _x2(y)

    def velocity_gradient(self, x, y, t):
        """((du1/dx, du1/dy), (du2/dx, du2/dy))."""
        e = np.exp(-t)
        return (
            (e * 2.0 * _x1(x) * _x1(y), e * _x2(x) * _x1p(y)),
            (-e * _x1p(x) * _x2(y), -e * 2.0 * _x1(x) * _x1(y)),
        )

    def velocity_laplacian(self, x, y, t):
        e = np.exp(-t)
        lap1 = e * (2.0 * _x1p(x) * _x1(y) + _x2(x) * _x1pp(y))
        lap2 = -e * (_x1pp(x) * _x2(y) + 2.0 * _x1(x) * _x1p(y))
        return lap1, lap2

    def divergence(self, x, y, t):
        g = self.velocity_gradient(x, y, t)
        return g[0][0] + g[1][1]

    def pressure(self, x, y, t):
        return np.exp(-t) * (3.0 * x * x + 3.0 * y * y - 2.0)

    def pressure_gradient(self, x, y, t):
        e = np.exp(-t)
        return 6.0 * x * e, 6.0 * y * e

    def concentration(self, x, y, t):
        return np.exp(-t) * _p1(x) * _p1(y)

    def concentration_gradient(self, x, y, t):
        e = np.exp(-t)
        return e * (2.0 * x - 1.0) * _p1(y), e * _p1(x) * (2.0 * y - 1.0)

    def concentration_hessian_diag(self, x, y, t):
        e = np.exp(-t)
        return 2.0 * e * _p1(y), 2.0 * e * _p1(x)


EXACT = ExactSolution()


def forcing_f(x, y, t, params: PhysicalParams, exact: ExactSolution = EXACT):
    """Momentum source making the exact fields solve the flow equations."""
    u1, u2 = exact.velocity(x, y, t)
    (u1x, u1y), (u2x, u2y) = exact.velocity_gradient(x, y, t)
    lap1, lap2 = exact.velocity_laplacian(x, y, t)
    px, py = exact.pressure_gradient(x, y, t)
    mu = params.viscosity(exact.concentration(x, y, t))
    rho = params.rho
    f1 = -rho * u1 + rho * (u1 * u1x + u2 * u1y) - mu * lap1 + px
    f2 = -rho * u2 + rho * (u1 * u2x + u2 * u2y) - mu * lap2 + py
    return f1, f2


def forcing_g(x, y, t, params: PhysicalParams, exact: ExactSolution = EXACT):
    """Transport source, with the product rule for space-dependent diffusion."""
    c = exact.concentration(x, y, t)
    cx, cy = exact.concentration_gradient(x, y, t)
    cxx, cyy = exact.concentration_hessian_diag(x, y, t)
    u1, u2 = exact.velocity(x, y, t)
    d1, d2 = params.diffusion(x, y, t)
    d1x, d2y = params.diffusion.divergence_terms(x, y, t)
    div_flux = d1x * cx + d1 * cxx + d2y * cy + d2 * cyy
    return -c - div_flux + u1 * cx + u2 * cy + params.alpha * c


@dataclass
class ErrorReport:
    """Running accumulators for the space-time error norms.

    ``l2h1_*`` hold the squared L2(H1) contributions, ``max_*`` the largest
    squared L2 error at the time levels, ``l2l2_p`` the squared L2(L2)
    pressure error.
    """

    l2h1_u: float = 0.0
    l2h1_c: float = 0.0
    l2l2_p: float = 0.0
    max_u: float = 0.0
    max_c: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def tildeV_u(self) -> float:
        return math.sqrt(self.max_u + self.l2h1_u)

    @property
    def tildeV_c(self) -> float:
        return math.sqrt(self.max_c + self.l2h1_c)

    @property
    def L2L2_p(self) -> float:
        return math.sqrt(self.l2l2_p)

    @property
    def total_error(self) -> float:
        return math.sqrt(self.max_u + self.l2h1_u + self.l2l2_p + self.max_c + self.l2h1_c)


def _split(state):
    return state.u1, state.u2, state.p, state.c


def level_errors(eq: ElementQuadrature, fields, t, exact: ExactSolution = EXACT):
    """Squared L2 / H1-seminorm errors of nodal fields (u1, u2, p, c) at time t.

    Returns a dict with keys ``u_l2``, ``u_h1``, ``p_l2``, ``c_l2``, ``c_h1``.
    """
    u1, u2, p, c = fields
    x, y = eq.x, eq.y
    ue1, ue2 = exact.velocity(x, y, t)
    (g11, g12), (g21, g22) = exact.velocity_gradient(x, y, t)
    cx, cy = exact.concentration_gradient(x, y, t)

    def l2(nodal, ref):
        return eq.integrate((eq.values(nodal) - ref) ** 2)

    def h1(nodal, gx, gy):
        g = eq.gradient(nodal)
        return eq.integrate((g[:, 0:1] - gx) ** 2 + (g[:, 1:2] - gy) ** 2)

    return {
        "u_l2": l2(u1, ue1) + l2(u2, ue2),
        "u_h1": h1(u1, g11, g12) + h1(u2, g21, g22),
        "p_l2": l2(p, exact.pressure(x, y, t)),
        "c_l2": l2(c, exact.concentration(x, y, t)),
        "c_h1": h1(c, cx, cy),
    }


def accumulate_norms(report: ErrorReport, state_n, state_np1, theta: float, dt: float,
                     eq: ElementQuadrature, exact: ExactSolution = EXACT) -> ErrorReport:
    """Add the contribution of the interval [t^n, t^{n+1}] to ``report``.

    The interval error is the theta-weighted combination of the two discrete
    levels compared with the exact fields at t^{n,theta}; the endpoint at
    t^{n+1} feeds the max-in-time terms.
    """
    w1, w0 = 0.5 * (1.0 + theta), 0.5 * (1.0 - theta)
    t_mid = state_n.t + w1 * dt
    mixed = [w1 * a + w0 * b for a, b in zip(_split(state_np1), _split(state_n))]
    e = level_errors(eq, mixed, t_mid, exact)
    report.l2h1_u += dt * (e["u_l2"] + e["u_h1"])
    report.l2h1_c += dt * (e["c_l2"] + e["c_h1"])
    report.l2l2_p += dt * e["p_l2"]
    observe_level(report, state_np1, eq, exact)
    return report


def observe_level(report: ErrorReport, state, eq: ElementQuadrature, exact: ExactSolution = EXACT) -> ErrorReport:
    """Fold the L2 errors of one time level into the max-in-time terms."""
    e = level_errors(eq, _split(state), state.t, exact)
    report.max_u = max(report.max_u, e["u_l2"])
    report.max_c = max(report.max_c, e["c_l2"])
    report.history.append((state.t, e["u_l2"], e["p_l2"], e["c_l2"]))
    return report


def rate_of_convergence(error_coarse: float, error_fine: float) -> float:
    if not (error_coarse > 0 and error_fine > 0):
        raise ValueError("errors must be positive to compute a convergence rate")
    return math.log2(error_coarse / error_fine)

"""Algebraic subgrid-scale parameters and the dynamic subscale history."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

QUASI_STATIC = "quasistatic"
DYNAMIC = "dynamic"
SUBSCALE_MODES = (QUASI_STATIC, DYNAMIC)
TRACKED = "tracked"
IMPLICIT = "implicit"
HISTORY_MODES = (TRACKED, IMPLICIT)


@dataclass(frozen=True)
class StabConfig:
    c1: float = 4.0
    c2: float = 2.0
    c3: float = 1.0
    subscale_mode: str = DYNAMIC
    # None sums the subscale history series to its limit, an int truncates it
    subscale_terms: Optional[int] = None
    # multiplies every tau; 0 switches the stabilization off
    tau_scale: float = 1.0
    # "tracked": d carries the residuals of earlier steps, d^{n+1} = x (r^n + d^n)
    # "implicit": d = S r built from the residual of the step being solved
    subscale_history: str = TRACKED

    def __post_init__(self):
        if self.subscale_mode not in SUBSCALE_MODES:
            raise ValueError(f"subscale_mode must be one of {SUBSCALE_MODES}, got {self.subscale_mode!r}")
        if min(self.c1, self.c2, self.c3) <= 0:
            raise ValueError("stabilization constants must be positive")
        if self.subscale_terms is not None and self.subscale_terms < 1:
            raise ValueError("subscale_terms must be >= 1")
        if self.tau_scale < 0:
            raise ValueError("tau_scale must be non-negative")
        if self.subscale_history not in HISTORY_MODES:
            raise ValueError(f"subscale_history must be one of {HISTORY_MODES}, got {self.subscale_history!r}")


@dataclass
class StabParams:
    """Per-element tau values and their time-discrete counterparts.

    ``ratio1``/``ratio3`` are tau'/tau and ``kappa1``/``kappa3`` are
    1 - tau'/tau, kept separately so that tau = 0 stays well defined.
    """

    tau1: np.ndarray
    tau2: np.ndarray
    tau3: np.ndarray
    tau1p: np.ndarray
    tau2p: np.ndarray
    tau3p: np.ndarray
    ratio1: np.ndarray
    ratio3: np.ndarray
    mode: str

    @property
    def kappa1(self):
        return 1.0 - self.ratio1

    @property
    def kappa3(self):
        return 1.0 - self.ratio3


def compute_tau(h, mu_u, u_norm, D_loc, alpha, rho, c1=4.0, c2=2.0, c3=1.0):
    """tau1, tau2, tau3 for element size ``h`` (scalars or arrays)."""
    h = np.asarray(h, dtype=float)
    mu_u = np.asarray(mu_u, dtype=float)
    u_norm = np.asarray(u_norm, dtype=float)
    D_loc = np.asarray(D_loc, dtype=float)
    if np.any(h <= 0):
        raise ValueError("element size must be positive")
    if np.any(mu_u <= 0):
        raise ValueError("viscosity bound must be positive")
    if np.any(u_norm < 0) or np.any(D_loc < 0) or alpha < 0:
        raise ValueError("velocity norm, diffusion and reaction must be non-negative")
    inv3 = 9.0 * D_loc / (4.0 * h * h) + 1.5 * u_norm / h + alpha
    if np.any(inv3 <= 0):
        raise ValueError("transport stabilization is ill-posed: no diffusion, advection or reaction")
    tau1 = 1.0 / (c1 * mu_u / (h * h) + c2 * rho * u_norm / h)
    tau2 = h * h / (c1 * tau1)
    tau3 = c3 / inv3
    return _unwrap(tau1), _unwrap(tau2), _unwrap(tau3)


def _unwrap(a):
    return float(a) if np.ndim(a) == 0 else a


def dynamic_tau(tau, rho, dt, mode=DYNAMIC):
    """tau' = (M/dt + tau^-1)^-1 for M = diag(rho, rho, 0, 1); identity when quasi-static."""
    tau1, tau2, tau3 = (np.asarray(t, dtype=float) for t in tau)
    if mode == QUASI_STATIC:
        return _unwrap(tau1), _unwrap(tau2), _unwrap(tau3)
    if mode != DYNAMIC:
        raise ValueError(f"unknown subscale mode {mode!r}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return _unwrap(tau1 * dt / (dt + rho * tau1)), _unwrap(tau2), _unwrap(tau3 * dt / (dt + tau3))


def make_stab_params(tau, rho, dt, config: StabConfig) -> StabParams:
    s = config.tau_scale
    tau1, tau2, tau3 = (s * np.asarray(t, dtype=float) for t in tau)
    if config.subscale_mode == QUASI_STATIC:
        one = np.ones_like(tau1)
        return StabParams(tau1, tau2, tau3, tau1, tau2, tau3, one, one.copy(), QUASI_STATIC)
    r1 = dt / (dt + rho * tau1)
    r3 = dt / (dt + tau3)
    return StabParams(tau1, tau2, tau3, tau1 * r1, tau2, tau3 * r3, r1, r3, DYNAMIC)


def _series(x, terms):
    """sum_{i=1}^{terms} x^i, or its limit x / (1 - x) when ``terms`` is None."""
    if terms is None:
        return x / (1.0 - x)
    return sum(x**i for i in range(1, terms + 1))


@dataclass
class SubscaleVector:
    d1: np.ndarray  # (..., 2)
    d2: np.ndarray
    d3: np.ndarray


def series_factors(tau1p, tau3p, rho, dt, mode=DYNAMIC, terms=None):
    """Scalar weights turning a residual into the subscale history vector."""
    tau1p = np.asarray(tau1p, dtype=float)
    tau3p = np.asarray(tau3p, dtype=float)
    if mode == QUASI_STATIC:
        return np.zeros_like(tau1p), np.zeros_like(tau3p)
    x1 = rho * tau1p / dt
    x3 = tau3p / dt
    if np.any(x1 >= 1.0) or np.any(x3 >= 1.0):
        raise ValueError("subscale series diverges: rho*tau1'/dt and tau3'/dt must be < 1")
    return _series(x1, terms), _series(x3, terms)


def history_ratios(tau1p, tau3p, rho, dt, mode=DYNAMIC):
    """One-step decay factors (rho*tau1'/dt, tau3'/dt) of the tracked history; zero when quasi-static."""
    tau1p = np.asarray(tau1p, dtype=float)
    tau3p = np.asarray(tau3p, dtype=float)
    if mode == QUASI_STATIC:
        return np.zeros_like(tau1p), np.zeros_like(tau3p)
    return rho * tau1p / dt, tau3p / dt


def subscale_history(r_momentum, r_transport, tau1p, tau3p, rho, dt, mode=DYNAMIC, terms=None) -> SubscaleVector:
    """Subscale vector d from a residual r = F - M dU/dt - L(u; U).

    ``r_momentum`` has a trailing axis of length 2; the continuity entry is
    always zero because the continuity row of M vanishes.
    """
    r_m = np.asarray(r_momentum, dtype=float)
    r_c = np.asarray(r_transport, dtype=float)
    s1, s3 = series_factors(tau1p, tau3p, rho, dt, mode, terms)
    d1 = np.asarray(s1)[..., None] * r_m
    d3 = s3 * r_c
    return SubscaleVector(d1, np.zeros_like(r_c), d3)

"""Coefficient models (viscosity, diffusion, reaction) and the benchmark cases."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class ConstantViscosity:
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("viscosity must be positive")

    def __call__(self, c):
        return np.full_like(np.asarray(c, dtype=float), self.mu)


@dataclass(frozen=True)
class ExponentialViscosity:
    """mu(c) = mu0 * exp(a * b * c)."""

    mu0: float
    a: float
    b: float

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")

    def __call__(self, c):
        return self.mu0 * np.exp(self.a * self.b * np.asarray(c, dtype=float))


ViscosityModel = Union[ConstantViscosity, ExponentialViscosity]


def viscosity_at(model: ViscosityModel, c):
    out = model(c)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ConstantDiffusion:
    D: float

    def __post_init__(self):
        if self.D < 0:
            raise ValueError("diffusion must be non-negative")

    def __call__(self, x, y, t):
        val = np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(self.D))
        return val, val.copy()

    def divergence_terms(self, x, y, t):
        """(dD1/dx, dD2/dy)."""
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy()


def _x1(s):
    return s * (s - 1.0) * (2.0 * s - 1.0)


def _x2(s):
    return s**2 * (s - 1.0) ** 2


@dataclass(frozen=True)
class ManufacturedDiffusion:
    """D1 = e^-t y^2(y-1)^2(2y-1)^2 x^4(x-1)^4, D2 the same with x and y swapped."""

    def __call__(self, x, y, t):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        e = np.exp(-np.asarray(t, dtype=float))
        d1 = e * _x1(y) ** 2 * _x2(x) ** 2
        d2 = e * _x1(x) ** 2 * _x2(y) ** 2
        return d1, d2

    def divergence_terms(self, x, y, t):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        e = np.exp(-np.asarray(t, dtype=float))
        # d/ds x2(s)^2 = 2 x2 * x2' and x2' = 2 x1
        d1x = e * _x1(y) ** 2 * 4.0 * _x2(x) * _x1(x)
        d2y = e * _x1(x) ** 2 * 4.0 * _x2(y) * _x1(y)
        return d1x, d2y


DiffusionField = Union[ConstantDiffusion, ManufacturedDiffusion]


def diffusion_at(field: DiffusionField, x, y, t):
    d1, d2 = field(x, y, t)
    if np.ndim(d1) == 0:
        return float(d1), float(d2)
    return d1, d2


@dataclass(frozen=True)
class PhysicalParams:
    """Coefficients of one coupled flow/transport problem.

    ``alpha`` is the linear reaction coefficient of the transport equation.
    """

    rho: float
    alpha: float
    viscosity: ViscosityModel
    diffusion: DiffusionField
    T: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("density must be positive")
        if self.alpha < 0:
            raise ValueError("reaction coefficient must be non-negative")
        if not self.T > 0:
            raise ValueError("final time must be positive")


# mu(c) = mu0 exp(27.93 * 0.028 c)
VISCOSITY_A = 27.93
VISCOSITY_B = 0.028
REACTION = 0.01

CASE_KEYS = ("I-a", "I-b", "I-c", "II-a", "II-b")


def make_case(key: str) -> PhysicalParams:
    """Coefficients of one benchmark case.

    Case I uses constant coefficients with rho = 1 and mu = 1/Re; case II
    couples the viscosity to the concentration and uses the manufactured
    diffusion fields.
    """
    reynolds = {"I-a": 50.0, "I-b": 500.0, "I-c": 5000.0}
    if key in reynolds:
        return PhysicalParams(1.0, REACTION, ConstantViscosity(1.0 / reynolds[key]), ConstantDiffusion(2.0))
    mu0 = {"II-a": 0.00954, "II-b": 0.0000954}
    if key in mu0:
        visc = ExponentialViscosity(mu0[key], VISCOSITY_A, VISCOSITY_B)
        return PhysicalParams(1.0, REACTION, visc, ManufacturedDiffusion())
    raise KeyError(f"unknown case {key!r}; expected one of {', '.join(CASE_KEYS)}")

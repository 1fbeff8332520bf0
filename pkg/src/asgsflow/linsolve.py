"""Sparse linear solves for the step systems and pressure normalisation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import NFIELDS, P, SparseSystem
from .fem import ElementQuadrature

DIRECT = "direct"
BICGSTAB = "bicgstab"
PIN_NODE = "pin-node"
MEAN_SHIFT = "mean-shift"


class SolverError(RuntimeError):
    """Raised when an iterative solve breaks down or misses its tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    method: str = DIRECT
    tol: float = 1e-10
    max_iters: int = 5000
    pressure_fix: str = PIN_NODE
    fallback: bool = True

    def __post_init__(self):
        if self.method not in (DIRECT, BICGSTAB):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("solver tolerance must be positive")
        if self.pressure_fix not in (PIN_NODE, MEAN_SHIFT):
            raise ValueError(f"unknown pressure fix {self.pressure_fix!r}")


@dataclass
class SolveRecord:
    method: str
    iterations: int
    residual: float


def relative_residual(matrix, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(matrix @ x - b)
    return r / nb if nb > 0 else r


def _ilu_bicgstab(a, b, config: SolverConfig):
    ilu = spla.spilu(a.tocsc(), drop_tol=0.0, fill_factor=1.0)
    m = spla.LinearOperator(a.shape, ilu.solve)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.bicgstab(a, b, rtol=config.tol, atol=0.0, maxiter=config.max_iters, M=m, callback=cb)
    res = relative_residual(a, x, b)
    if info != 0 or not np.isfinite(res) or res > config.tol:
        raise SolverError(f"BiCGSTAB did not converge (info={info}, residual={res:.3e})", res)
    return x, count[0], res


def solve(system: SparseSystem, config: SolverConfig = SolverConfig()):
    """Solve ``system``; returns (x, SolveRecord).

    Iterative failures raise SolverError unless ``config.fallback`` is set,
    in which case the direct factorisation is used instead.
    """
    a = sp.csr_matrix(system.matrix)
    b = np.asarray(system.rhs, dtype=float)
    if a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError("system must be square and match the right-hand side")
    if not np.isfinite(b).all():
        raise ValueError("right-hand side is not finite")
    if config.method == BICGSTAB:
        try:
            x, its, res = _ilu_bicgstab(a, b, config)
            return x, SolveRecord(BICGSTAB, its, res)
        except (SolverError, RuntimeError) as exc:
            if not config.fallback:
                if isinstance(exc, SolverError):
                    raise
                raise SolverError(str(exc)) from exc
    x = spla.splu(a.tocsc(), permc_spec="COLAMD").solve(b)
    res = relative_residual(a, x, b)
    if not np.isfinite(res):
        raise SolverError("direct solve produced non-finite values", res)
    return x, SolveRecord(DIRECT, 1, res)


def pin_pressure(system: SparseSystem, node: int = 0, value: float = 0.0) -> SparseSystem:
    """Replace the continuity row of ``node`` by p(node) = value."""
    dof = NFIELDS * node + P
    keep = np.ones(system.matrix.shape[0])
    keep[dof] = 0.0
    a = (sp.diags(keep) @ system.matrix + sp.diags(1.0 - keep)).tocsr()
    rhs = np.array(system.rhs, dtype=float)
    rhs[dof] = value
    return replace(system, matrix=a, rhs=rhs)


def pressure_mean(p, eq: ElementQuadrature) -> float:
    return eq.integrate(eq.values(p)) / eq.mesh.areas.sum()


def fix_pressure_nullspace(solution, eq: ElementQuadrature, mode: str = MEAN_SHIFT) -> np.ndarray:
    """Shift the pressure dofs of an interleaved solution to zero mean.

    Both modes end with the shift; pin-node only differs in what was done
    before the solve.
    """
    if mode not in (PIN_NODE, MEAN_SHIFT):
        raise ValueError(f"unknown pressure fix {mode!r}")
    x = np.array(solution, dtype=float)
    p = x[P::NFIELDS]
    x[P::NFIELDS] = p - pressure_mean(p, eq)
    return x

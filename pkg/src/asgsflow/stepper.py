"""Theta-scheme time integration of the coupled system."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import assembly as asmb
from .assembly import Assembler, CoupledState
from .fem import l2_project
from .linsolve import PIN_NODE, SolverConfig, fix_pressure_nullspace, pin_pressure, solve
from .mesh import StructuredTriMesh
from .mms import EXACT, ErrorReport, ExactSolution, accumulate_norms, forcing_f, forcing_g, observe_level
from .models import PhysicalParams
from .stabilization import StabConfig, SubscaleVector


@dataclass(frozen=True)
class SchemeConfig:
    """theta = 1 is backward Euler, theta = 0 Crank-Nicolson."""

    theta: float = 1.0
    dt: float = 0.1
    T: float = 1.0

    def __post_init__(self):
        if self.theta not in (0, 1):
            raise ValueError("theta must be 0 or 1")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if abs(self.n_steps * self.dt - self.T) > 1e-12 * max(1.0, self.T):
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def t_mid(self, t_n: float) -> float:
        return t_n + 0.5 * (1.0 + self.theta) * self.dt


def manufactured_forcing(params: PhysicalParams, exact: ExactSolution = EXACT) -> Callable:
    def forcing(x, y, t):
        f1, f2 = forcing_f(x, y, t, params, exact)
        return f1, f2, forcing_g(x, y, t, params, exact)

    return forcing


def initialize(mesh: StructuredTriMesh, exact: Optional[ExactSolution] = EXACT, t0: float = 0.0) -> CoupledState:
    """L2-projected initial velocity and concentration, interpolated pressure."""
    if exact is None:
        return CoupledState.zeros(mesh.n_nodes, t0)
    u1 = l2_project(mesh, lambda x, y: exact.velocity(x, y, t0)[0], zero_boundary=True)
    u2 = l2_project(mesh, lambda x, y: exact.velocity(x, y, t0)[1], zero_boundary=True)
    c = l2_project(mesh, lambda x, y: exact.concentration(x, y, t0), zero_boundary=True)
    p = exact.pressure(mesh.nodes[:, 0], mesh.nodes[:, 1], t0)
    return CoupledState(u1, u2, p, c, t0)


@dataclass
class StepResult:
    state: CoupledState
    residual: float
    system: asmb.SparseSystem = field(repr=False)
    subscales: Optional[object] = field(default=None, repr=False)


# eps for the eps*(p, q) term that makes equal-order Galerkin solvable
GALERKIN_PRESSURE_PENALTY = 1e-8


class ThetaStepper:
    """Advance a coupled state one step at a time on a fixed mesh."""

    def __init__(self, mesh_or_asm, params: PhysicalParams, scheme: SchemeConfig, method: str = asmb.ASGS,
                 stab_config: StabConfig = StabConfig(), solver_config: SolverConfig = SolverConfig(),
                 forcing: Optional[Callable] = None, exact: Optional[ExactSolution] = None, picard_iters: int = 0,
                 pressure_penalty: Optional[float] = None):
        self.asm = mesh_or_asm if isinstance(mesh_or_asm, Assembler) else Assembler(mesh_or_asm)
        self.params = params
        self.scheme = scheme
        self.method = method
        self.stab_config = stab_config
        self.solver_config = solver_config
        self.forcing = forcing
        self.exact = exact
        self.picard_iters = int(picard_iters)
        if self.picard_iters < 0:
            raise ValueError("picard_iters must be >= 0")
        if pressure_penalty is None:
            pressure_penalty = GALERKIN_PRESSURE_PENALTY if method == asmb.GALERKIN else 0.0
        self.pressure_penalty = pressure_penalty
        # tracked subscale history d at quadrature points, (nel, nq, 4)
        self.history = None

    @property
    def mesh(self):
        return self.asm.mesh

    def reset(self) -> None:
        """Forget the tracked subscale history before starting a new trajectory."""
        self.history = None

    def _solve_once(self, state_n, lag):
        sc = self.scheme
        system = asmb.assemble_step(self.asm, state_n, sc.dt, sc.theta, self.params, self.stab_config,
                                    self.method, self.forcing, lag, self.pressure_penalty, self.history)
        system = asmb.apply_dirichlet(system, self.asm)
        t_new = state_n.t + sc.dt
        pin_value = 0.0
        if self.solver_config.pressure_fix == PIN_NODE and self.exact is not None:
            x0, y0 = self.mesh.nodes[0]
            pin_value = float(self.exact.pressure(x0, y0, t_new))
        x, record = solve(pin_pressure(system, 0, pin_value), self.solver_config)
        x = fix_pressure_nullspace(x, self.asm.eq, self.solver_config.pressure_fix)
        x[self.asm.dirichlet_dofs] = 0.0
        return system, x, record

    def step(self, state_n: CoupledState) -> StepResult:
        t_new = state_n.t + self.scheme.dt
        system, x, record = self._solve_once(state_n, None)
        for _ in range(self.picard_iters):
            system, x, record = self._solve_once(state_n, CoupledState.from_vector(x, t_new))
        subscales = None
        if system.decay is not None:
            self.history = asmb.advance_history(system, self.asm, x, self.history)
            h = self.history
            subscales = SubscaleVector(h[..., asmb.U1:asmb.U2 + 1], h[..., asmb.P], h[..., asmb.C])
        elif system.rop is not None:
            subscales = asmb.subscale_vector(system, self.asm, x)
        state = CoupledState.from_vector(x, t_new)
        if not state.is_finite():
            raise FloatingPointError(f"non-finite state at t={t_new:g}")
        return StepResult(state, record.residual, system, subscales)


@dataclass
class RunResult:
    final: CoupledState
    report: ErrorReport
    trajectory: Optional[List[CoupledState]]
    eta: Optional[float] = None
    max_residual: float = 0.0
    walltime_s: float = 0.0
    step_records: list = field(default_factory=list, repr=False)


def run(mesh: StructuredTriMesh, params: PhysicalParams, scheme: SchemeConfig, method: str = asmb.ASGS,
        stab_config: StabConfig = StabConfig(), solver_config: SolverConfig = SolverConfig(),
        exact: Optional[ExactSolution] = EXACT, store: bool = False, estimate: bool = False,
        picard_iters: int = 0, initial: Optional[CoupledState] = None, forcing: Optional[Callable] = None,
        keep_steps: bool = False, pressure_penalty: Optional[float] = None) -> RunResult:
    """Integrate from t=0 to t=T, accumulating the error norms on the fly.

    With ``exact=None`` the problem is homogeneous (zero forcing, zero data)
    unless ``forcing``/``initial`` are supplied; errors are then measured
    against the zero solution. ``keep_steps`` retains each step's
    stabilization parameters and subscale vector.
    """
    from .estimator import compute_residuals

    start = time.perf_counter()
    asm = Assembler(mesh)
    if forcing is None and exact is not None:
        forcing = manufactured_forcing(params, exact)
    stepper = ThetaStepper(asm, params, scheme, method, stab_config, solver_config, forcing, exact,
                           picard_iters, pressure_penalty)
    state = initial if initial is not None else initialize(mesh, exact)
    reference = exact if exact is not None else ZERO_SOLUTION
    report = ErrorReport()
    observe_level(report, state, asm.eq, reference)
    trajectory = [state] if store else None
    max_res = 0.0
    eta = None
    records = []
    for n in range(scheme.n_steps):
        res = stepper.step(state)
        new = res.state
        new.t = (n + 1) * scheme.dt
        accumulate_norms(report, state, new, scheme.theta, scheme.dt, asm.eq, reference)
        max_res = max(max_res, res.residual)
        if keep_steps:
            records.append((res.system.stab_params, res.subscales))
        if estimate and n == scheme.n_steps - 1:
            eta = compute_residuals(state, new, scheme.theta, scheme.dt, asm.eq, params, forcing).eta
        state = new
        if store:
            trajectory.append(state)
    return RunResult(state, report, trajectory, eta, max_res, time.perf_counter() - start, records)


class _ZeroSolution(ExactSolution):
    """Identically zero fields, the reference for homogeneous runs."""

    def velocity(self, x, y, t):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z.copy()

    def velocity_gradient(self, x, y, t):
        z = np.zeros(np.broadcast(x, y).shape)
        return (z, z), (z, z)

    def velocity_laplacian(self, x, y, t):
        return self.velocity(x, y, t)

    def pressure(self, x, y, t):
        return np.zeros(np.broadcast(x, y).shape)

    def pressure_gradient(self, x, y, t):
        return self.velocity(x, y, t)

    def concentration(self, x, y, t):
        return np.zeros(np.broadcast(x, y).shape)

    def concentration_gradient(self, x, y, t):
        return self.velocity(x, y, t)

    def concentration_hessian_diag(self, x, y, t):
        return self.velocity(x, y, t)


ZERO_SOLUTION = _ZeroSolution()

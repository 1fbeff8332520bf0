"""Convergence studies over simultaneously refined grids and time steps."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

from .config import StudyConfig
from .mesh import build_unit_square_mesh
from .mms import rate_of_convergence
from .models import make_case
from .stepper import SchemeConfig, run

log = logging.getLogger(__name__)

CSV_FIELDS = ("case", "method", "theta", "n_div", "dt", "total_error", "roc", "eta", "walltime_s")


class StudyError(RuntimeError):
    """A numerical failure inside one (grid, method) cell of a study."""


@dataclass
class StudyRow:
    case: str
    method: str
    theta: int
    n_div: int
    dt: float
    total_error: float
    roc: Optional[float] = None
    eta: Optional[float] = None
    walltime_s: Optional[float] = None
    tildeV_u: float = 0.0
    L2L2_p: float = 0.0
    tildeV_c: float = 0.0


@dataclass
class ConvergenceReport:
    config: StudyConfig
    rows: List[StudyRow]

    def column(self, method: str) -> List[StudyRow]:
        return [r for r in self.rows if r.method == method]

    def errors(self, method: str) -> List[float]:
        return [r.total_error for r in self.column(method)]

    def rates(self, method: str) -> List[float]:
        return [r.roc for r in self.column(method) if r.roc is not None]

    def etas(self, method: str) -> List[Optional[float]]:
        return [r.eta for r in self.column(method)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in self.rows:
            writer.writerow([r.case, r.method, r.theta, r.n_div, _fmt(r.dt), _fmt(r.total_error), _fmt(r.roc),
                             _fmt(r.eta), "" if r.walltime_s is None else f"{r.walltime_s:.3f}"])
        return buf.getvalue()

    def format_table(self) -> str:
        """Side-by-side table: time step, grid, then error and RoC per method."""
        methods = [m for m in ("galerkin", "asgs") if m in self.config.methods]
        head = f"{'dt':>9} {'grid':>10}" + "".join(f" {m + ' error':>16} {'RoC':>9}" for m in methods)
        lines = [f"case {self.config.case}, theta={self.config.theta}, T={self.config.T:g}", head, "-" * len(head)]
        for n, dt in zip(self.config.grids, self.config.dts):
            line = f"{dt:>9.5g} {f'{n}x{n}':>10}"
            for m in methods:
                row = next(r for r in self.rows if r.method == m and r.n_div == n)
                roc = "" if row.roc is None else f"{row.roc:.6f}"
                line += f" {row.total_error:>16.6g} {roc:>9}"
            lines.append(line)
        return "\n".join(lines)


def _fmt(v) -> str:
    return "" if v is None else f"{v:.10g}"


def run_cell(config: StudyConfig, method: str, n_div: int, dt: float) -> StudyRow:
    """One (grid, method) entry of a study."""
    params = make_case(config.case)
    scheme = SchemeConfig(config.theta, dt, config.T)
    try:
        result = run(build_unit_square_mesh(n_div), params, scheme, method, config.stab, config.solver,
                     estimate=config.estimate, picard_iters=config.picard_iters,
                     pressure_penalty=config.pressure_penalty)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        raise StudyError(f"case {config.case}, method {method}, grid {n_div}x{n_div}, dt {dt:g}: {exc}") from exc
    rep = result.report
    log.info("%s %s %dx%d dt=%g total=%.6g (%.1fs)", config.case, method, n_div, n_div, dt, rep.total_error,
             result.walltime_s)
    return StudyRow(config.case, method, config.theta, n_div, dt, rep.total_error, None, result.eta,
                    result.walltime_s if config.timing else None, rep.tildeV_u, rep.L2L2_p, rep.tildeV_c)


def run_study(config: StudyConfig) -> ConvergenceReport:
    cells = [(m, n, dt) for m in config.methods for n, dt in zip(config.grids, config.dts)]
    if config.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(run_cell, config, *cell) for cell in cells]
            rows = [f.result() for f in futures]
    else:
        rows = [run_cell(config, *cell) for cell in cells]
    order = {m: i for i, m in enumerate(config.methods)}
    rows.sort(key=lambda r: (order[r.method], r.n_div))
    for prev, cur in zip(rows, rows[1:]):
        if prev.method == cur.method:
            cur.roc = rate_of_convergence(prev.total_error, cur.total_error)
    return ConvergenceReport(config, rows)

"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line and the lines are repeated
in the pytest terminal summary. Convergence studies are shared between
criteria through a cache. Criteria 1-4 run grids up to 80x80 and take
several minutes on one core.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import time

import pytest

from asgsflow.config import parse_config
from asgsflow.selftest import run_all
from asgsflow.study import run_study

RESULTS: dict = {}

TABLE1_REFERENCE = (0.158556, 0.0833, 0.0430609, 0.0219347)


@functools.lru_cache(maxsize=None)
def study(case: str, grids: str = "10,20,40,80", dts: str = "0.1,0.05,0.025,0.0125", theta: int = 1,
          estimate: bool = False):
    overrides = {"case": case, "grids": grids, "dts": dts, "time.theta": str(theta), "estimate": str(estimate)}
    return run_study(parse_config(None, overrides))


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def _fmt(values):
    return "[" + ", ".join(f"{v:.4g}" for v in values) + "]"


@pytest.mark.slow
def test_criterion_1_table1_reproduction():
    rep = study("I-a", estimate=True)
    ok, parts = True, []
    for method in ("galerkin", "asgs"):
        errors, rates = rep.errors(method), rep.rates(method)
        within = all(ref / 2 <= e <= 2 * ref for e, ref in zip(errors, TABLE1_REFERENCE))
        finest = all(abs(r - 1.0) <= 0.10 for r in rates[-2:])
        ok &= within and finest
        parts.append(f"{method} errors {_fmt(errors)} within x2 of reference: {within}; "
                     f"finest RoC {_fmt(rates[-2:])} within 1+-0.10: {finest}")
    report(1, "case I-a magnitudes and rates", ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_2_high_reynolds_stability_contrast():
    rep = study("I-c")
    asgs_rates = rep.rates("asgs")
    gal_rates = rep.rates("galerkin")
    asgs_ok = all(0.85 <= r <= 1.05 for r in asgs_rates)
    spread = max(gal_rates) - min(gal_rates)
    report(2, "case I-c contrast", asgs_ok and spread > 0.3,
           f"asgs RoC {_fmt(asgs_rates)} in [0.85, 1.05]: {asgs_ok}; "
           f"galerkin RoC {_fmt(gal_rates)} spread {spread:.3f} > 0.3: {spread > 0.3}")


@pytest.mark.slow
def test_criterion_3_low_viscosity_contrast():
    rep = study("II-b")
    level = rep.config.grids.index(40)
    gal, asgs = rep.errors("galerkin")[level], rep.errors("asgs")[level]
    rates = rep.rates("asgs")
    rates_ok = all(0.85 <= r <= 1.1 for r in rates)
    report(3, "case II-b contrast", gal >= 2 * asgs and rates_ok,
           f"40x40 galerkin {gal:.4g} vs asgs {asgs:.4g} (ratio {gal / asgs:.3f} >= 2: {gal >= 2 * asgs}); "
           f"asgs RoC {_fmt(rates)} in [0.85, 1.1]: {rates_ok}")


@pytest.mark.slow
def test_criterion_4_moderate_viscosity_parity():
    rep = study("II-a")
    gal, asgs = rep.errors("galerkin"), rep.errors("asgs")
    gaps = [abs(g - a) / max(g, a) for g, a in zip(gal, asgs)]
    parity = all(gap <= 0.05 for gap in gaps)
    rates_ok = {m: all(0.9 <= r <= 1.0 for r in rep.rates(m)) for m in ("galerkin", "asgs")}
    report(4, "case II-a parity", parity and all(rates_ok.values()),
           f"relative gaps {_fmt(gaps)} <= 0.05: {parity}; galerkin RoC {_fmt(rep.rates('galerkin'))} "
           f"in [0.9, 1.0]: {rates_ok['galerkin']}; asgs RoC {_fmt(rep.rates('asgs'))}: {rates_ok['asgs']}")


def test_criterion_5_property_suite():
    start = time.perf_counter()
    results = run_all(echo=lambda _: None)
    elapsed = time.perf_counter() - start
    failed = [r.name for r in results if not r.passed]
    detail = "; ".join(f"{r.name}: {r.detail}" for r in results)
    report(5, "property suite", not failed and elapsed < 60.0,
           f"{len(results) - len(failed)}/{len(results)} checks passed in {elapsed:.1f}s (< 60 s). {detail}")


@pytest.mark.slow
def test_criterion_6_crank_nicolson_not_worse():
    cn = study("I-a", grids="40", dts="0.025", theta=0)
    be = study("I-a", grids="40", dts="0.025", theta=1)
    parts, ok = [], True
    for method in ("galerkin", "asgs"):
        e0, e1 = cn.errors(method)[0], be.errors(method)[0]
        ok &= e0 <= e1
        parts.append(f"{method} theta=0 {e0:.5g} <= theta=1 {e1:.5g}: {e0 <= e1}")
    report(6, "temporal order at 40x40, dt=0.025", ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_7_estimator_scaling():
    rep = study("I-a", grids="10,20,40", dts="0.1,0.05,0.025", estimate=True)
    parts, ok = [], True
    for method in ("galerkin", "asgs"):
        etas = rep.etas(method)
        factors = [a / b for a, b in zip(etas, etas[1:])]
        good = all(1.5 <= f <= 3.0 for f in factors)
        ok &= good
        parts.append(f"{method} eta {_fmt(etas)} factors {_fmt(factors)} in [1.5, 3.0]: {good}")
    report(7, "estimator scaling on case I-a", ok, "; ".join(parts))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))

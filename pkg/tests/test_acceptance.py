"""Acceptance criteria at their stated sample sizes and tolerances.

Each test prints one ``PASS`` or ``FAIL`` line to the terminal, past
output capture, before asserting.
"""
from __future__ import annotations

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from critperc.exploration import explore
from critperc.harness import experiments as ex
from critperc.harness.config import default_config, thresholds
from critperc.hexlattice import BLUE, DomainSpec, delta_approximation
from critperc.loopbuilder import run_until
from critperc.percolation import LazyColoring, sample, trace_contours
from critperc.sle import DrivingFunction, capacity, sample_driving, solve_trace, stopping_schedule

from .test_exploration import _endpoints, eager_interface

ROOT = Path(__file__).resolve().parent


_CAPSYS = []


@pytest.fixture(autouse=True)
def _terminal(capsys):
    _CAPSYS[:] = [capsys]
    yield


def report(n: int, name: str, ok: bool, detail: str) -> None:
    with _CAPSYS[0].disabled():
        print(f"\nCRITERION {n:2d} {'PASS' if ok else 'FAIL'} {name}: {detail}", flush=True)
    assert ok, f"criterion {n} ({name}): {detail}"


@pytest.fixture(scope="module")
def cardy_outcome():
    return ex.run_cardy_convergence(default_config("cardy"))


@pytest.fixture(scope="module")
def loops_outcome():
    return ex.run_loop_census(default_config("loops"))


def _rec(outcome, name, **match):
    return [r for r in outcome.records if r.experiment == name and all(r.params.get(k) == v for k, v in match.items())]


def test_01_contour_oracle_equality():
    t0 = time.perf_counter()
    bad = 0
    disks = {}
    for s in range(1000):
        radius = 4.0 + (s % 29)  # up to 64 hexagons across
        if radius not in disks:
            disks[radius] = delta_approximation(DomainSpec.disk(radius=radius), 1.0)
        D = disks[radius]
        col = sample(D.hexes, 1001, s).as_dict()
        ls, _, st = run_until(D, col, 1e-9)
        bad += bool(st.queue) or ls.keys() != trace_contours(col, D.hexes, BLUE).keys()
    wall = time.perf_counter() - t0
    report(1, "contour oracle", bad == 0 and wall < 60, f"{bad} mismatches in 1000 runs, {wall:.1f} s")


def test_02_lazy_equals_eager_exploration():
    t0 = time.perf_counter()
    D = delta_approximation(DomainSpec.disk(radius=8.0), 1.0)
    x, y = _endpoints(D)
    bad = 0
    for s in range(1000):
        lazy = explore(D, x, y, LazyColoring(2002, s))
        ref, leftover = eager_interface(D, x, y, sample(D.hexes, 2002, s).as_dict())
        bad += lazy.edges != ref or bool(leftover)
    wall = time.perf_counter() - t0
    report(2, "exploration determinism", bad == 0 and wall < 10, f"{bad} mismatches in 1000 seeds, {wall:.1f} s")


def test_03_cardy_symmetric_point(cardy_outcome):
    (r,) = _rec(cardy_outcome, "cardy-square", delta=1 / 64)
    ok = r.params["n"] == 100_000 and abs(r.statistic) <= 3 and abs(r.estimate - 0.5) <= 0.01
    report(3, "Cardy symmetric point", ok, f"{r.estimate:.5f} +- {r.stderr:.5f} (z = {r.statistic:.2f})")


def test_04_cardy_trend(cardy_outcome):
    rows = _rec(cardy_outcome, "cardy-rectangle")
    (orc,) = _rec(cardy_outcome, "cardy-oracle")
    errs = [r.statistic for r in rows]
    ok = ([r.params["delta"] for r in rows] == [1 / 16, 1 / 32, 1 / 64]
          and all(a > b for a, b in zip(errs, errs[1:])) and orc.statistic <= 1e-6)
    report(4, "Cardy convergence trend", ok,
           "errors " + ", ".join(f"{e:.4f}" for e in errs) + f"; oracle gap {orc.statistic:.1e}")


def test_05_exit_law():
    out = ex.run_exit_law(default_config("exit-law"))
    (ks,) = _rec(out, "exit-ks-cardy", delta=1 / 64)
    (ks2,) = _rec(out, "exit-ks-sle", delta=1 / 64)
    ok = ks.params["n"] == 10_000 and ks.estimate <= 0.02 and ks2.estimate <= 0.03
    report(5, "exit law", ok, f"KS to Cardy {ks.estimate:.4f}, KS to SLE(6) {ks2.estimate:.4f}")


def test_06_loewner_accuracy():
    n = 25_000
    d = DrivingFunction(1e-5 * np.arange(n + 1), np.zeros(n + 1))
    ch = solve_trace(d)
    dev = float(np.abs(ch.trace - 2j * np.sqrt(ch.times)).max())
    cap = capacity(np.exp(1j * np.linspace(math.pi, 0, 4001)))
    rel = abs(cap - 0.5) / 0.5
    report(6, "Loewner solver", dev <= 1e-3 and rel <= 0.01, f"sup deviation {dev:.1e}, half-disk capacity error {rel:.2%}")


def test_07_capacity_bound():
    eps, worst, viol = 0.1, 0.0, 0
    for s in range(1000):
        sch = stopping_schedule(sample_driving(0.05, 1e-4, 7000 + s), eps, 20, strict=False)
        viol += int(np.sum(sch.increments > eps * eps / 2))
        worst = max(worst, float(sch.increments.max()))
    report(7, "capacity bound", viol == 0, f"{viol} violations in 1000 runs; largest increment {worst:.5f} "
                                           f"vs {eps * eps / 2:.5f}")


def test_08_k_boundedness(loops_outcome):
    q = [r.estimate for r in _rec(loops_outcome, "loops-k95")]
    (ratio,) = _rec(loops_outcome, "loops-k95-ratio")
    ok = ratio.estimate < thresholds()["loop_census"]["k95_ratio"]
    report(8, "K boundedness", ok, "95th percentiles " + ", ".join(f"{x:g}" for x in q) + f"; ratio {ratio.estimate:.2f}")


def test_09_loop_structure(loops_outcome):
    recs = {r.experiment: r for r in loops_outcome.records}
    vals = {k: recs[f"loops-{k}"].estimate for k in ("alternation", "overlaps", "triple-points")}
    runs = recs["loops-alternation"].params["runs"]
    report(9, "loop structure", runs == 1000 and not any(vals.values()),
           f"{runs} runs: " + ", ".join(f"{k} {int(v)}" for k, v in vals.items()))


def test_10_mushroom_decay(loops_outcome):
    rows = _rec(loops_outcome, "mushroom")
    (trend,) = _rec(loops_outcome, "mushroom-trend")
    report(10, "mushroom decay", trend.passed and all(r.params["n"] == 2000 for r in rows),
           ", ".join(f"{r.params['delta']:g}: {r.estimate:.4f}" for r in rows))


SUITES = [
    "tests/test_curvespace.py",
    "tests/test_conformal.py::test_roundtrip_and_cauchy_riemann",
    "tests/test_conformal.py::test_cross_ratio_of_preimages_is_automorphism_invariant",
    "tests/test_cardy.py::test_cross_ratio_invariant_under_disk_automorphisms",
    "tests/test_cardy.py::test_phi_is_a_regularised_beta_and_self_dual",
]


def test_11_property_suites():
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *SUITES],
                         cwd=ROOT.parent, capture_output=True, text=True)
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    report(11, "property suites", res.returncode == 0, tail)

"""Acceptance criteria, one test each, printing a PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest

from hciz_interp.ei import run_ei, variance_decay_report
from hciz_interp.error_formulas import (
    HcizProblem,
    corollary1_error_mc,
    direct_error_exponential,
    direct_error_gaussian,
    direct_error_polynomial,
    flat_limit_check,
    hciz_z_montecarlo,
    hermite_genocchi_error_mc,
    random_structure_checks,
    theorem1_error_mc,
)
from hciz_interp.functions import from_id, modulate_gaussian
from hciz_interp.interp import (
    FrequencySet,
    NodeSet,
    fit_exponential,
    fit_gaussian,
    run_convergence,
)
from hciz_interp.numerics.dd import ExtendedReal, exp as dd_exp
from hciz_interp.numerics.sampling import RngStream

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def _distinct(gen, n, lo=-1.0, hi=1.0, gap=0.05):
    while True:
        x = np.sort(gen.uniform(lo, hi, n))
        if n == 1 or np.min(np.diff(x)) > gap:
            return x


def _x0_away(gen, x, gap=0.05):
    while True:
        x0 = float(gen.uniform(-1, 1))
        if np.min(np.abs(x - x0)) > gap:
            return x0


@pytest.fixture(scope="module")
def ei_run():
    f = from_id("neg-rational-pole:5")
    start = time.perf_counter()
    trace = run_ei(f, (-1.0, 1.0), iterations=15, x1=-1.0, grid_size=4096, rng=RngStream(8))
    return trace, time.perf_counter() - start


def test_hciz_identity(report):
    gen = np.random.default_rng(1)
    start = time.perf_counter()
    hits = 0
    for k in range(20):
        n = int(gen.integers(2, 4))
        p = HcizProblem(_distinct(gen, n), _distinct(gen, n))
        est = hciz_z_montecarlo(p, 1_000_000, RngStream(100, k))
        hits += est.z_score() <= 3
    elapsed = time.perf_counter() - start
    ok = hits >= 18 and elapsed <= 180
    assert report(1, ok, f"{hits}/20 within 3 SE, {elapsed:.1f} s")


def test_exponential_error_formula(report):
    gen = np.random.default_rng(2)
    fids = ("exp:0.3", "poly:1,0,2", "rational-pole:5")
    start = time.perf_counter()
    hits = 0
    for k in range(30):
        n = k % 3 + 1
        f = from_id(fids[(k // 3) % 3])
        x = _distinct(gen, n)
        p = HcizProblem(x, _distinct(gen, n), x0=_x0_away(gen, x))
        est = theorem1_error_mc(p, f, 100_000, RngStream(200, k))
        hits += est.z_score(direct_error_exponential(p, f), atol=1e-14) <= 3
    elapsed = time.perf_counter() - start
    ok = hits >= 27 and elapsed <= 120
    assert report(2, ok, f"{hits}/30 with z <= 3, {elapsed:.1f} s")


def test_gaussian_error_formula(report):
    gen = np.random.default_rng(3)
    fids = ("exp:0.3", "poly:1,0,2", "rational-pole:5")
    hits = 0
    for k in range(30):
        n = k % 3 + 1
        f = from_id(fids[(k // 3) % 3])
        x = _distinct(gen, n)
        x0 = _x0_away(gen, x)
        est = corollary1_error_mc(x, f, x0, 100_000, RngStream(300, k))
        hits += est.z_score(direct_error_gaussian(x, f, x0), atol=1e-14) <= 3
    assert report(3, hits >= 27, f"{hits}/30 with z <= 3")


def test_hermite_genocchi(report):
    gen = np.random.default_rng(4)
    fids = ("poly:1,-2,0,3,0,0,1", "poly:0,1,1,1", "exp:0.7", "exp:-1.3")
    zs = []
    for k in range(24):
        n = k % 6 + 1
        f = from_id(fids[k % 4])
        x = _distinct(gen, n)
        x0 = _x0_away(gen, x)
        est = hermite_genocchi_error_mc(x, f, x0, 100_000, RngStream(400, k))
        zs.append(est.z_score(direct_error_polynomial(x, f, x0), atol=1e-13))
    hits = sum(z <= 3 for z in zs)
    quad = hermite_genocchi_error_mc([0.0, 1.0], from_id("poly:0,0,1"), 0.5, 1000, RngStream(4))
    ok = hits >= 0.9 * len(zs) and abs(quad.mean + 0.25) <= 1e-12
    detail = f"{hits}/24 with z <= 3 (max {max(zs):.2f}), x^2 two-node value {quad.mean!r}"
    assert report(4, ok, detail)


def test_flat_limit(report):
    start = time.perf_counter()
    table = flat_limit_check(NodeSet.from_strategy("equispaced", 5), from_id("runge"))
    elapsed = time.perf_counter() - start
    ratios = table.ratios
    ok = table.monotone and all(5 <= r <= 20 for r in ratios) and elapsed <= 10
    detail = ", ".join(f"{r:.2f}" for r in ratios)
    assert report(5, ok, f"ratios [{detail}], {elapsed:.1f} s")


def test_gaussian_rbf_convergence(report):
    f = from_id("rational-pole:5")
    start = time.perf_counter()
    eq = run_convergence(f, "gaussian", "equispaced", range(2, 21))
    left = run_convergence(f, "gaussian", "left-half", range(2, 21))
    elapsed = time.perf_counter() - start
    ok = (eq.sup_errors[-1] <= 1e-6 and eq.fitted_ratio <= 0.5
          and left.fitted_ratio <= 0.9 and elapsed <= 60)
    detail = (f"e20 {eq.sup_errors[-1]:.2e}, ratio {eq.fitted_ratio:.3f}; "
              f"left-half ratio {left.fitted_ratio:.3f}; {elapsed:.1f} s")
    assert report(6, ok, detail)


def test_runge_contrast(report):
    rep = run_convergence(from_id("runge"), "polynomial", "equispaced", [5, 20])
    e5, e20 = rep.sup_errors
    assert report(7, e20 > e5, f"e5 {e5:.3g}, e20 {e20:.3g}")


def test_ei_convergence(report, ei_run):
    trace, elapsed = ei_run
    ratio = trace.gap_ratio(0.1)
    ok = (trace.final_gap <= 1e-4 and trace.gaps_non_increasing() and ratio <= 0.5
          and abs(trace.f_star + 0.04) <= 1e-12 and elapsed <= 30)
    detail = (f"final gap {trace.final_gap:.2e}, non-increasing {trace.gaps_non_increasing()}, "
              f"gap ratio {ratio:.3f}, {elapsed:.1f} s")
    assert report(8, ok, detail)


def test_ei_bound(report, ei_run):
    trace, _ = ei_run
    worst = trace.max_lemma_violation()
    assert report(9, worst <= 1e-9, f"max violation {worst:.3g}")


def test_variance_decay(report, ei_run):
    trace, _ = ei_run
    decay = variance_decay_report([r.max_variance for r in trace.records])
    final = decay.max_variance[-1]
    tail = decay.ratios[-5:]
    ok = final <= 1e-6 and decay.decreasing_tail(5)
    detail = f"max var {final:.2e}, last ratios [{', '.join(f'{r:.3g}' for r in tail)}]"
    assert report(10, ok, detail)


def test_structural_invariants(report):
    rep = random_structure_checks(10_000, RngStream(11))
    gen = np.random.default_rng(12)
    worst = 0.0
    fids = ("exp:0.3", "poly:1,0,2", "rational-pole:5", "runge", "gauss-shift:0.4")
    for k in range(50):
        n = int(gen.integers(1, 11))
        nodes = NodeSet(_distinct(gen, n, gap=0.02), (-1.0, 1.0))
        f = from_id(fids[k % len(fids)])
        x = nodes.nodes
        inner = fit_exponential(nodes, FrequencySet(x), modulate_gaussian(f, +1).eval_extended(x))
        direct = fit_gaussian(nodes, f.eval_extended(x))
        grid = np.linspace(-1, 1, 501)
        weight = dd_exp(ExtendedReal.from_product(grid, grid).scale(-1) * -1.0)
        lhs = weight * inner.evaluate_extended(grid)
        worst = max(worst, float(np.max(np.abs((lhs - direct.evaluate_extended(grid)).to_float()))))
    ok = (rep.interlacing_violations == 0 and rep.ratio_violations == 0
          and rep.rayleigh_violations == 0 and worst <= 1e-8)
    detail = (f"{rep.draws} draws: interlacing {rep.interlacing_violations}, "
              f"kernel ratio {rep.ratio_violations}, containment {rep.rayleigh_violations}; "
              f"operator relation max {worst:.2e} on 50 instances")
    assert report(11, ok, detail)


def test_mean_identity(report, ei_run):
    trace, _ = ei_run
    worst = trace.max_identity_error()
    others = [run_ei(from_id(fid), iterations=8, grid_size=1024).max_identity_error()
              for fid in ("runge", "exp:0.3", "gauss-shift:0.4", "poly:1.5")]
    worst_all = max([worst] + others)
    assert report(12, worst_all <= 1e-8, f"max |m - I^g| {worst_all:.2e} over 5 runs")

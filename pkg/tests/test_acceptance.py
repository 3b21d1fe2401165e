"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from idslab import cli, measures as M
from idslab.experiments import CounterexampleConfig, ExperimentConfig, counterexample_integrals, \
    run_sharpness_shift, run_theorem1_dos, run_theorem1_ids
from idslab.ids import default_grid, empirical_ids
from idslab.kyfan import ConvexTestFunction, batch_check
from idslab.parallel import default_workers

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def load(name):
    return ExperimentConfig.from_dict(json.loads((CONFIGS / name).read_text()))


def test_criterion_1_kyfan_suite(record_criterion):
    t0 = time.perf_counter()
    phis = [ConvexTestFunction.abs(), ConvexTestFunction.square(), ConvexTestFunction.hinge(0.5),
            ConvexTestFunction.hinge(-0.25)]
    records = batch_check(1000, phis, master_seed=2024, max_dim=20)
    elapsed = time.perf_counter() - t0
    convex = [r for r in records if r["phi"] != "trace"]
    trace = [r for r in records if r["phi"] == "trace"]
    worst_convex = min(r["margin"] / (1 + abs(r["rhs"])) for r in convex)
    worst_trace = max(abs(r["lhs"] - r["rhs"]) / (1 + abs(r["rhs"])) for r in trace)
    ok = (len(trace) == 1000 and worst_convex >= -1e-9 and worst_trace <= 1e-9 and elapsed < 10
          and max(r["dim"] for r in records) <= 20)
    record_criterion(1, ok, f"worst relative margin {worst_convex:.3e}, trace error {worst_trace:.2e}, "
                            f"{elapsed:.1f}s")
    assert ok


def test_criterion_2_per_sample_dos(record_criterion):
    cfg = load("thm1_dos.json")
    assert cfg.shape.side_lengths == (500,) and cfg.n_samples == 200
    t0 = time.perf_counter()
    r = run_theorem1_dos(cfg, workers=default_workers())
    elapsed = time.perf_counter() - t0
    agg = r.aggregates
    per_sample_ok = all(s["holds"] for s in r.per_sample) and len(r.per_sample) == 200
    rhs = agg["d_kr_mu"] + 3 * agg["se_sample_w1"]
    ok = (per_sample_ok and abs(agg["d_kr_mu"] - 0.05) <= 1e-12 and agg["d_kr_rho"] <= rhs
          and elapsed < 120)
    record_criterion(2, ok, f"d_kr_rho {agg['d_kr_rho']:.6f} <= {rhs:.6f}, "
                            f"min per-sample margin {min(s['margin'] for s in r.per_sample):.3e}, "
                            f"{elapsed:.1f}s")
    assert ok


def test_criterion_3_sharpness(record_criterion):
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    for c in (0.3, 1.0):
        cfg = ExperimentConfig(experiment="sharpness_shift", shift=c, shapes=[(10,), (100,), (500,), (20, 20)])
        r = run_sharpness_shift(cfg, workers=default_workers())
        errors = [abs(s["d_kr_rho"] - c) for s in r.per_sample]
        worst = max(worst, *errors)
        ok &= len(errors) == 4 and max(errors) <= 1e-12
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    record_criterion(3, ok, f"max |d_kr_rho - c| {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_free_ids_oracle(record_criterion):
    t0 = time.perf_counter()
    mu = M.point_mass(0.0)
    grid = default_grid(mu, 1)
    exact = np.arccos(np.clip(1 - grid / 2, -1, 1)) / np.pi
    err = {}
    for L in (1000, 2000):
        ids = empirical_ids((L,), mu, 1, grid)
        err[L] = float(np.max(np.abs(ids.values - exact)))
    elapsed = time.perf_counter() - t0
    ratio = err[1000] / err[2000]
    ok = ratio >= 1.5 and err[2000] < 5e-3 and elapsed < 30
    record_criterion(4, ok, f"sup error {err[1000]:.3e} -> {err[2000]:.3e}, ratio {ratio:.2f}, {elapsed:.1f}s")
    assert ok


def test_criterion_5_ids_bound(record_criterion):
    cfg = load("thm1_ids.json")
    assert cfg.shape.side_lengths == (500,)
    t0 = time.perf_counter()
    r = run_theorem1_ids(cfg, workers=default_workers())
    elapsed = time.perf_counter() - t0
    agg = r.aggregates
    rhs = agg["bound"] + 3 * agg["sup_diff_se"]
    ok = abs(agg["d_kr_mu"] - 0.05) <= 1e-12 and agg["sup_diff"] <= rhs and elapsed < 180
    record_criterion(5, ok, f"sup|N - N~| {agg['sup_diff']:.4f} <= {rhs:.4f} "
                            f"(best delta {agg['best_delta']:.3f}), {elapsed:.1f}s")
    assert ok


def _random_atomic(rng):
    k = int(rng.integers(1, 9))
    return M.atomic(rng.uniform(-3, 3, k), rng.dirichlet(np.ones(k)), support_bound=3.0)


def test_criterion_6_metric_module(record_criterion):
    rng = np.random.default_rng(6)
    asym = tri = 0.0
    sandwich_ok = True
    for _ in range(500):
        a, b, c = (_random_atomic(rng) for _ in range(3))
        for dist in (M.kr_distance, M.bl_distance):
            ab, ba, bc, ac = dist(a, b), dist(b, a), dist(b, c), dist(a, c)
            asym = max(asym, abs(ab - ba))
            tri = max(tri, ac - ab - bc)
        for p, q in ((a, b), (b, c), (a, c)):
            sandwich_ok &= M.metric_sandwich_check(p, q)["holds"]
    w1_gap = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 300))
        x, y = rng.normal(size=n), rng.uniform(-2, 2, n)
        w1_gap = max(w1_gap, abs(M.kr_distance(M.from_samples(x), M.from_samples(y)) - M.w1_sorted_matching(x, y)))
    ok = asym == 0.0 and tri <= 1e-10 and sandwich_ok and w1_gap <= 1e-10
    record_criterion(6, ok, f"asymmetry {asym:.1e}, triangle slack {tri:.1e}, sandwich {sandwich_ok}, "
                            f"W1 routes differ by {w1_gap:.1e}")
    assert ok


def test_criterion_7_counterexample_regimes(record_criterion):
    eps = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    t0 = time.perf_counter()
    d4 = np.array([p["difference"] for p in counterexample_integrals(
        CounterexampleConfig(4, 1.0, 0.1, eps)).per_sample])
    d1 = np.array([p["difference"] for p in counterexample_integrals(
        CounterexampleConfig(1, 1.0, 0.1, eps)).per_sample])
    elapsed = time.perf_counter() - t0
    d4_monotone = bool(np.all(np.diff(d4) > 0))
    d4_growth = d4[-1] / d4[0]
    d1_spread = max(d1.max() / d1[0], d1[0] / d1.min())
    ok = d4_monotone and d4_growth > 10 and d1_spread <= 2 and elapsed < 10
    record_criterion(7, ok, f"d=4 monotone {d4_monotone}, growth {d4_growth:.2f}x (needs > 10); "
                            f"d=1 within factor {d1_spread:.3f}; {elapsed:.2f}s")
    assert ok


RUNS = [
    ("experiment", "thm1_dos.json"),
    ("experiment", "thm1_ids.json"),
    ("experiment", "sharpness.json"),
    ("experiment", "holder_rate.json"),
    ("ids", "bernoulli_ids.json"),
    ("kyfan-check", "kyfan.json"),
    ("spectrum", "free1d.json"),
    ("counterexample", "counterexample_d1.json"),
]


def test_criterion_8_reproducibility(record_criterion, tmp_path):
    mismatched = []
    n_files = 0
    for command, config in RUNS:
        outs = []
        for workers in (1, 8):
            out = tmp_path / f"{config}-{workers}"
            code = cli.main([command, "--config", str(CONFIGS / config), "--out", str(out),
                             "--workers", str(workers)])
            assert code == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        n_files += len(outs[0])
        if outs[0] != outs[1]:
            mismatched.append(config)
    ok = not mismatched
    record_criterion(8, ok, f"{len(RUNS)} runs, {n_files} files compared at 1 and 8 workers, "
                            f"mismatches: {mismatched or 'none'}")
    assert ok

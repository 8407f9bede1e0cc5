"""Acceptance criteria, one test each, at the stated tolerances and runtime budgets.

Every test records a one-line PASS/FAIL verdict; ``conftest.py`` prints the
lines at the end of the session, and running this file directly prints them too.
"""
import json
import math
import time

import numpy as np
import pytest

from sqdn.analysis import batch_means, decay_window, fit_decay_rate, mm1k_mean_queue, sup_distance
from sqdn.cli import main
from sqdn.equilibrium import equilibrium_bounds, fixed_point, interval_index, j_star, lambda_star
from sqdn.fluid import drift, linear_regime_system
from sqdn.integrator import IntegratorConfig, distance_to, integrate, linear_solution
from sqdn.io import csv_body
from sqdn.params import ModelParams
from sqdn.simulation import PolicySpec, SimConfig, compare_policies, simulate
from sqdn.state import FluidState, coordinates, offset

RESULTS = []


def report(n, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail} [{elapsed:.2f}s / {budget:g}s]"
    RESULTS.append(line)
    print(line)
    return ok


GRID_LAMBDAS = (0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99)
GRID_DS = (2, 3, 4)


def grid():
    for d in GRID_DS:
        edges = [lambda_star(n, d) for n in range(0, 12)]
        for lam in GRID_LAMBDAS:
            if any(abs(lam - e) <= 1e-12 for e in edges):
                continue
            yield ModelParams(lam, d)


def test_c01_fixed_point_low_load():
    t0 = time.perf_counter()
    rep = fixed_point(ModelParams(0.45, 2))
    x = rep.fixed_point
    err = max(abs(x[0, 0] - 0.05), abs(x[0, 1] - 0.5), abs(x[1, 1] - 0.45))
    ok = err < 1e-12 and rep.residual < 1e-9
    assert report(1, ok, f"max abs error {err:.2e}, residual {rep.residual:.2e}", time.perf_counter() - t0, 1)


def test_c02_fixed_point_grid():
    t0 = time.perf_counter()
    worst_res = worst_off = worst_sum = 0.0
    count = 0
    for p in grid():
        rep = fixed_point(p)
        js = rep.jstar
        rows, cols = coordinates(p.buffer)
        off = np.abs(rep.fixed_point.x[(cols != js) & (cols != js + 1)]).max()
        worst_res = max(worst_res, rep.residual)
        worst_off = max(worst_off, off)
        worst_sum = max(worst_sum, abs(rep.fixed_point.x.sum() - 1))
        count += 1
    ok = worst_res < 1e-9 and worst_off <= 1e-12 and worst_sum <= 1e-12
    detail = (f"{count} (lambda, d) points: max residual {worst_res:.2e}, "
              f"mass off support {worst_off:.1e}, |sum-1| {worst_sum:.1e}")
    assert report(2, ok, detail, time.perf_counter() - t0, 5)


def test_c03_jstar_table():
    t0 = time.perf_counter()
    ok = j_star(ModelParams(0.995, 2)) == 4
    low = np.linspace(1e-4, 0.5, 400, endpoint=False)
    ok &= all(j_star(ModelParams(float(v), 2)) == 0 for v in low)
    rng = np.random.default_rng(2024)
    mism = 0
    for _ in range(200):
        p = ModelParams(float(rng.uniform(0.001, 0.999)), int(rng.integers(2, 6)))
        mism += j_star(p) != interval_index(p)
    ok &= mism == 0
    detail = f"j*(0.995,2)={j_star(ModelParams(0.995, 2))}, floor vs interval mismatches {mism}/200"
    assert report(3, ok, detail, time.perf_counter() - t0, 1)


def test_c04_proposition_bounds():
    t0 = time.perf_counter()
    gap_err = 0.0
    inside = True
    for p in grid():
        rep = fixed_point(p)
        lo, hi, gap = equilibrium_bounds(p)
        gap_err = max(gap_err, abs(rep.L_M - rep.L_S - 1 / p.d))
        inside &= lo <= rep.L_S <= hi
    ok = gap_err < 1e-9 and inside
    assert report(4, ok, f"max |L_M-L_S-1/d| {gap_err:.2e}, L_S within bounds: {inside}",
                  time.perf_counter() - t0, 1)


def test_c05_drift_conservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    boundary = 0
    for k in range(1000):
        top = int(rng.integers(2, 21))
        p = ModelParams(float(rng.uniform(0.01, 0.99)), int(rng.integers(1, 6)), top)
        prefix = int(rng.integers(0, top)) if k % 2 else -1
        boundary += prefix >= 0
        x = FluidState.random(top, rng, zero_prefix=prefix).x
        worst = max(worst, abs(drift(x, p).sum()))
    ok = worst <= 1e-12
    assert report(5, ok, f"1000 points ({boundary} with empty memory prefixes), max |sum b| {worst:.1e}",
                  time.perf_counter() - t0, 1)


def test_c06_linear_regime_oracle():
    t0 = time.perf_counter()
    p = ModelParams(0.45, 2)
    A, c = linear_regime_system(p)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        x = FluidState.random(p.buffer, rng).x
        x00 = rng.uniform(0.05, 0.5)
        x[0] = 0.0
        x *= (1.0 - x00) / x.sum()
        x[0] = x00
        worst = max(worst, np.abs(drift(x, p) - (A @ x + c)).max())
    x0 = FluidState.empty_system(p.buffer).x
    traj = integrate(x0, p, IntegratorConfig(dt=1e-3, t_end=5.0, sample_every=0.5, scheme="rk4"))
    positive = traj.coordinate(0, 0).min()
    exact = linear_solution(x0, fixed_point(p).fixed_point.x, A, traj.times)
    gap = np.abs(traj.states - exact).max()
    ok = worst <= 1e-12 and positive > 0 and gap < 1e-6
    detail = f"drift vs linear form {worst:.1e}; rk4 vs exp(At) up to t=5: {gap:.1e} (min x00 {positive:.3f})"
    assert report(6, ok, detail, time.perf_counter() - t0, 10)


def test_c07_global_stability():
    t0 = time.perf_counter()
    p = ModelParams(0.45, 2)
    target = fixed_point(p).fixed_point.x
    cfg = IntegratorConfig(dt=1e-3, t_end=20.0, sample_every=0.1)
    rng = np.random.default_rng(7)
    starts = [FluidState.empty_system(p.buffer).x] + [FluidState.random(p.buffer, rng).x for _ in range(20)]
    finals, fits_ok = [], []
    for x0 in starts:
        traj = integrate(x0, p, cfg)
        dist = distance_to(traj, target)
        finals.append(dist[-1, 1])
        try:
            fit = fit_decay_rate(dist, decay_window(traj, dist))
            fits_ok.append(fit.beta_hat > 0 and fit.r_squared >= 0.98)
        except ValueError:
            fits_ok.append(False)
    finals = np.array(finals)
    ok = finals.max() < 1e-4 and all(fits_ok)
    detail = (f"all-idle: {finals[0]:.1e}; random starts: {int((finals[1:] < 1e-4).sum())}/20 below 1e-4 "
              f"(max {finals[1:].max():.1e}); decay fits ok {sum(fits_ok)}/21")
    assert report(7, ok, detail, time.perf_counter() - t0, 30)


def test_c08_mm1k_oracle():
    t0 = time.perf_counter()
    cfg = SimConfig(ModelParams(0.5, 1, 10), n_servers=1, horizon=1.05e6, sample_every=100.0, warmup=100.0,
                    seed=8)
    res = simulate(cfg)
    mean, se = batch_means(res, 50)
    truth = mm1k_mean_queue(0.5, 10)
    ok = res.n_events >= 10 ** 6 and abs(mean - truth) < 3 * se
    detail = f"{res.n_events} events: mean {mean:.5f} vs {truth:.5f} (|diff| = {abs(mean - truth) / se:.2f} SE)"
    assert report(8, ok, detail, time.perf_counter() - t0, 30)


def test_c09_fluid_convergence():
    t0 = time.perf_counter()
    p = ModelParams(0.45, 2)
    fluid = integrate(FluidState.empty_system(p.buffer).x, p, IntegratorConfig(t_end=10.0))
    ks = [offset(0, 0, p.buffer), offset(0, 1, p.buffer), offset(1, 1, p.buffer)]
    wins, masses = 0, []
    for s in range(10):
        small = simulate(SimConfig(p, n_servers=100, horizon=10.0, seed=s))
        big = simulate(SimConfig(p, n_servers=1000, horizon=10.0, seed=s))
        wins += sup_distance(big, fluid) < sup_distance(small, fluid)
        masses.append(big.states[-1, ks].sum())
    ok = wins >= 8 and min(masses) >= 0.95
    detail = f"N=1000 closer in {wins}/10 seed pairs; min terminal three-cell mass {min(masses):.3f}"
    assert report(9, ok, detail, time.perf_counter() - t0, 120)


def test_c10_memory_advantage():
    t0 = time.perf_counter()
    cfg = SimConfig(ModelParams(0.45, 2), n_servers=500, horizon=40.0, warmup=10.0, seed=100,
                    departure_mode="potential-departure")
    cmp = compare_policies(cfg, [PolicySpec(), PolicySpec(kind="sqd-classic")], 20)
    mean, lo, hi = cmp.paired("sqdn-memory", "sqd-classic")
    idle = cmp.rows[0]["idle_assign_frac"]
    ok = hi < 0 and idle >= 0.95
    detail = (f"L_S memory - classic = {mean:.4f} (95% CI {lo:.4f}, {hi:.4f}); "
              f"idle-assignment fraction {idle:.4f}")
    assert report(10, ok, detail, time.perf_counter() - t0, 180)


def test_c11_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    runs = {
        "simulate": ["simulate", "--lambda", "0.45", "--d", "2", "--n", "100", "--horizon", "10", "--seed", "7"],
        "fluid": ["fluid", "--lambda", "0.9", "--d", "2", "--horizon", "5"],
        "compare": ["compare", "--lambda", "0.45", "--d", "2", "--n", "100", "--horizon", "5",
                    "--replications", "3", "--seed", "3"],
        "experiment": ["experiment", "stability-sweep", "--buffer", "8", "--horizon", "5"],
        "fixed-point": ["fixed-point", "--lambda", "0.9", "--d", "3"],
        "thresholds": ["thresholds", "--d", "3", "--n-max", "6"],
    }
    same = []
    for verb, args in runs.items():
        outs = []
        for k in range(2):
            out = tmp_path / f"{verb}{k}"
            assert main(args + ["--out", str(out)]) == 0
            stdout = capsys.readouterr().out
            files = sorted(f for f in out.glob("*.csv")) if out.exists() else []
            outs.append(([csv_body(f) for f in files], [f.name for f in files],
                         stdout if not files else ""))
        same.append(outs[0] == outs[1])
    ok = all(same)
    detail = f"{sum(same)}/{len(same)} verbs byte-identical across re-runs"
    assert report(11, ok, detail, time.perf_counter() - t0, 60)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))

import numpy as np
import pytest

from sqdn.analysis import (batch_means, decay_window, fit_decay_rate, liftoff_time, mean_ci, mm1k_distribution,
                           mm1k_mean_queue, paired_difference, sup_distance)
from sqdn.equilibrium import fixed_point
from sqdn.integrator import IntegratorConfig, Trajectory, distance_to, integrate
from sqdn.params import ModelParams
from sqdn.simulation import SimConfig, simulate
from sqdn.state import FluidState, size

P = ModelParams(0.45, 2, 6)


def fluid(t_end=10.0):
    return integrate(FluidState.empty_system(6).x, P, IntegratorConfig(t_end=t_end))


def test_sup_distance_trivial_cases():
    tr = fluid(2.0)
    assert sup_distance(tr, tr) == 0.0
    shifted = tr.states.copy()
    shifted[:, 3] += 1e-3
    other = Trajectory(P, tr.times, shifted)
    assert sup_distance(other, tr) == pytest.approx(1e-3, rel=1e-9)


def test_sup_distance_errors():
    tr = fluid(2.0)
    with pytest.raises(ValueError):
        sup_distance(Trajectory(ModelParams(0.45, 2, 5), tr.times, np.zeros((len(tr), size(5)))), tr)
    longer = fluid(3.0)
    with pytest.raises(ValueError):
        sup_distance(longer, tr)


def test_sup_distance_accepts_simulation_results():
    res = simulate(SimConfig(P, n_servers=200, horizon=2.0, seed=1))
    assert 0 < sup_distance(res, fluid(2.0)) < 1


def test_fit_recovers_synthetic_exponential():
    t = np.linspace(0, 4, 81)
    fit = fit_decay_rate(np.column_stack([t, 2 * np.exp(-3 * t)]), (0.5, 3.5))
    assert fit.beta_hat == pytest.approx(3, abs=1e-9)
    assert fit.alpha_hat == pytest.approx(2, abs=1e-9)
    assert fit.r_squared == pytest.approx(1, abs=1e-9)
    assert fit.window == (0.5, 3.5)


def test_fit_constant_and_bad_input():
    t = np.linspace(0, 1, 11)
    fit = fit_decay_rate(np.column_stack([t, np.full(11, 0.3)]), (0, 1))
    assert fit.beta_hat == pytest.approx(0, abs=1e-12) and fit.r_squared == 1.0
    with pytest.raises(ValueError):
        fit_decay_rate(np.column_stack([t, t - 0.5]), (0, 1))
    with pytest.raises(ValueError):
        fit_decay_rate(np.column_stack([t, t + 1]), (2, 3))


def test_fluid_decay_fit_after_liftoff():
    tr = fluid(20.0)
    dist = distance_to(tr, fixed_point(P).fixed_point.x)
    assert liftoff_time(tr) == 0.0
    fit = fit_decay_rate(dist, decay_window(tr, dist))
    assert fit.beta_hat > 0 and fit.r_squared >= 0.98


def test_liftoff_of_a_loaded_start():
    x0 = FluidState.from_entries({(3, 3): 1.0}, 6).x
    tr = integrate(x0, P, IntegratorConfig(t_end=15.0))
    lift = liftoff_time(tr)
    assert 1.0 < lift < 15.0
    assert np.all(tr.coordinate(0, 0)[tr.times >= lift] > 0)


def test_confidence_intervals():
    mean, half = mean_ci([1.0, 2.0, 3.0])
    # with 2 degrees of freedom the t quantile is (2p - 1) / sqrt(2 p (1 - p))
    p = 0.975
    t2 = (2 * p - 1) / np.sqrt(2 * p * (1 - p))
    assert mean == 2.0 and half == pytest.approx(t2 / np.sqrt(3), rel=1e-10)
    m, lo, hi = paired_difference([1, 2, 3], [0, 1, 2.5])
    assert lo <= m <= hi and m == pytest.approx(2.5 / 3)


def test_mm1k_oracle():
    rho, top = 0.5, 10
    pi = mm1k_distribution(rho, top)
    assert mm1k_mean_queue(rho, top) == pytest.approx(np.arange(top + 1) @ pi, rel=1e-14)
    assert mm1k_mean_queue(1.0, 4) == 2.0


def test_batch_means_on_long_single_server_run():
    cfg = SimConfig(ModelParams(0.5, 1, 10), n_servers=1, horizon=20000.0, sample_every=10.0, warmup=100.0)
    mean, se = batch_means(simulate(cfg), 40)
    assert abs(mean - mm1k_mean_queue(0.5, 10)) < 4 * se

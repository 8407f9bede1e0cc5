"""Post-processing: stochastic-vs-fluid distance, decay-rate fits, confidence intervals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .integrator import Trajectory
from .params import EPS_ZERO


@dataclass(frozen=True)
class DecayFit:
    beta_hat: float
    alpha_hat: float
    r_squared: float
    window: tuple[float, float]


def sup_distance(stoch, fluid: Trajectory) -> float:
    """Largest Euclidean gap between a sampled stochastic path and the fluid path.

    The fluid trajectory is linearly interpolated onto the stochastic sample
    times; its horizon must cover them.
    """
    if hasattr(stoch, "trajectory"):
        stoch = stoch.trajectory()
    if stoch.params.buffer != fluid.params.buffer:
        raise ValueError(f"buffer mismatch: I={stoch.params.buffer} vs I={fluid.params.buffer}")
    if stoch.times[-1] > fluid.times[-1] + 1e-9 or stoch.times[0] < fluid.times[0] - 1e-9:
        raise ValueError("fluid trajectory does not cover the stochastic horizon")
    gap = stoch.states - fluid.at(stoch.times)
    return float(np.linalg.norm(gap, axis=1).max())


def fit_decay_rate(dist, window: tuple[float, float]) -> DecayFit:
    """Least-squares line through ``(t, log v)`` on ``window``; ``beta_hat`` is minus the slope."""
    dist = np.asarray(dist, dtype=float)
    t, v = dist[:, 0], dist[:, 1]
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 2:
        raise ValueError(f"window {window} holds fewer than two points")
    t, v = t[sel], v[sel]
    if np.any(v <= 0):
        raise ValueError("non-positive values in the fit window; shrink the window")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float((resid ** 2).sum()) / ss_tot)
    return DecayFit(float(-slope), float(np.exp(intercept)), r2, (float(t[0]), float(t[-1])))


def liftoff_time(traj: Trajectory) -> float:
    """First sample time after which ``x_{0,0}`` stays strictly positive."""
    x00 = traj.states[:, 0]
    zero = np.nonzero(x00 <= EPS_ZERO)[0]
    if len(zero) == 0:
        return float(traj.times[0])
    last = zero[-1]
    if last + 1 >= len(traj.times):
        return float("inf")
    return float(traj.times[last + 1])


def decay_window(traj: Trajectory, dist, burn: float = 1.0, floor: float = 1e-10) -> tuple[float, float]:
    """Fit window starting ``burn`` after liftoff and ending before the distance hits ``floor``."""
    dist = np.asarray(dist, dtype=float)
    start = liftoff_time(traj) + burn
    below = np.nonzero((dist[:, 0] >= start) & (dist[:, 1] <= floor))[0]
    end = dist[below[0] - 1, 0] if len(below) else dist[-1, 0]
    return float(start), float(end)


def mean_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Sample mean and the half-width of its Student-t confidence interval."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    mean = float(values.mean())
    if n < 2:
        return mean, float("inf")
    half = stats.t.ppf(0.5 + level / 2, n - 1) * values.std(ddof=1) / np.sqrt(n)
    return mean, float(half)


def paired_difference(a, b, level: float = 0.95) -> tuple[float, float, float]:
    """Mean of ``a - b`` over paired replications with its confidence bounds."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mean, half = mean_ci(diff, level)
    return mean, mean - half, mean + half


def batch_means(result, n_batches: int = 50) -> tuple[float, float]:
    """Time-average queue length per server and its batch-means standard error.

    Uses the cumulative job-time area recorded at each sample, so batch
    boundaries must fall on sample times.
    """
    times = result.times
    area = result.counters["area"] / result.config.n_servers
    start = np.searchsorted(times, result.config.warmup - 1e-12)
    idx = np.linspace(start, len(times) - 1, n_batches + 1).round().astype(int)
    means = np.diff(area[idx]) / np.diff(times[idx])
    return float(means.mean()), float(means.std(ddof=1) / np.sqrt(n_batches))


def mm1k_mean_queue(rho: float, buffer: int) -> float:
    """Mean number in system of an M/M/1 queue holding at most ``buffer`` jobs."""
    if rho == 1.0:
        return buffer / 2.0
    return rho * (1 - (buffer + 1) * rho ** buffer + buffer * rho ** (buffer + 1)) / (
        (1 - rho) * (1 - rho ** (buffer + 1)))


def mm1k_distribution(rho: float, buffer: int) -> np.ndarray:
    w = rho ** np.arange(buffer + 1)
    return w / w.sum()

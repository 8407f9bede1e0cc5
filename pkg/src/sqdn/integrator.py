"""Forward integration of the fluid model on the simplex.

The right-hand side jumps across the surfaces where a memory prefix empties,
so the default is explicit Euler with a small fixed step followed by a
clip-and-renormalize projection. RK4 is offered for runs that stay in the
smooth region ``x_{0,0} > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StepRejected
from .fluid import drift_matrix, mass_functionals
from .params import EPS_MASS, ModelParams
from .state import FluidState, check_state, coordinates, from_square, to_square

SCHEMES = ("euler", "rk4")
PROJECTIONS = ("clip-renormalize", "none")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    sample_every: float = 0.1
    scheme: str = "euler"
    projection: str = "clip-renormalize"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}", field="dt")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}", field="horizon")
        if self.sample_every < self.dt * (1 - 1e-9):
            raise ConfigError("sample_every must be at least dt", field="sample_every")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}", field="scheme")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"projection must be one of {PROJECTIONS}", field="projection")


@dataclass
class Trajectory:
    """Sampled path: ``states[k]`` is the flat state at ``times[k]``."""

    params: ModelParams
    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> FluidState:
        return FluidState(self.states[k], self.params.buffer)

    def coordinate(self, i: int, j: int) -> np.ndarray:
        from .state import offset
        return self.states[:, offset(i, j, self.params.buffer)]

    def mass_functionals(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = coordinates(self.params.buffer)
        return self.states @ rows, self.states @ cols

    def at(self, t) -> np.ndarray:
        """Linear interpolation of the states at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.min() < self.times[0] - 1e-12 or t.max() > self.times[-1] + 1e-12:
            raise ValueError("interpolation outside the trajectory's time range")
        out = np.empty((len(t), self.states.shape[1]))
        for k in range(self.states.shape[1]):
            out[:, k] = np.interp(t, self.times, self.states[:, k])
        return out


def _project(X: np.ndarray, t: float, projection: str) -> np.ndarray:
    if not np.all(np.isfinite(X)):
        raise StepRejected(t, "non-finite entries")
    if projection == "clip-renormalize":
        np.maximum(X, 0.0, out=X)
        X /= X.sum()
    low = X.min()
    total = X.sum()
    if low < -EPS_MASS or abs(total - 1.0) > EPS_MASS:
        buffer = X.shape[0] - 1
        bad = [(int(i), int(j)) for i, j in zip(*coordinates(buffer)) if X[i, j] < -EPS_MASS]
        raise StepRejected(t, bad or "total mass", f"step rejected at t={t:.6g}: "
                           f"min entry {low:.3g}, total mass {total!r}, offending {bad}")
    return X


def integrate(x0, p: ModelParams, cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    x0 = np.asarray(x0, dtype=float)
    check_state(x0, p.buffer)
    dt = cfg.dt
    n_steps = int(round(cfg.t_end / dt))
    every = max(1, int(round(cfg.sample_every / dt)))

    X = to_square(x0, p.buffer)
    times = [0.0]
    states = [x0.copy()]
    for n in range(1, n_steps + 1):
        if cfg.scheme == "euler":
            X = X + dt * drift_matrix(X, p)
        else:
            k1 = drift_matrix(X, p)
            k2 = drift_matrix(X + 0.5 * dt * k1, p)
            k3 = drift_matrix(X + 0.5 * dt * k2, p)
            k4 = drift_matrix(X + dt * k3, p)
            X = X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        X = _project(X, n * dt, cfg.projection)
        if n % every == 0 or n == n_steps:
            times.append(n * dt)
            states.append(from_square(X))

    meta = {"scheme": cfg.scheme, "dt": dt, "projection": cfg.projection,
            "lambda": p.lam, "d": p.d, "I": p.buffer}
    return Trajectory(p, np.array(times), np.array(states), meta)


def distance_to(traj: Trajectory, target) -> np.ndarray:
    """``(n, 2)`` array of ``(t, ||x(t) - target||_2)``."""
    target = np.asarray(target, dtype=float)
    if target.shape != traj.states.shape[1:]:
        raise ValueError(f"target has shape {target.shape}, trajectory states {traj.states.shape[1:]}")
    dist = np.linalg.norm(traj.states - target, axis=1)
    return np.column_stack([traj.times, dist])


def summary_table(traj: Trajectory, target=None) -> dict[str, np.ndarray]:
    """Columns ``t, L_S, L_M, x00, dist_to_fixed_point`` for plotting."""
    ls, lm = traj.mass_functionals()
    cols = {"t": traj.times, "L_S": ls, "L_M": lm, "x00": traj.states[:, 0]}
    if target is not None:
        cols["dist_to_fixed_point"] = distance_to(traj, target)[:, 1]
    return cols


def expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series."""
    M = np.asarray(M, dtype=float)
    norm = np.abs(M).sum(axis=1).max()
    s = max(0, int(np.ceil(np.log2(norm / 0.25))) if norm > 0.25 else 0)
    S = M / 2.0 ** s
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, 30):
        term = term @ S / k
        out = out + term
        if np.abs(term).max() < 1e-18:
            break
    for _ in range(s):
        out = out @ out
    return out


def linear_solution(x0, fixed, A: np.ndarray, times) -> np.ndarray:
    """``x(t) = x* + exp(A t)(x0 - x*)`` at each requested time."""
    x0 = np.asarray(x0, dtype=float)
    fixed = np.asarray(fixed, dtype=float)
    return np.array([fixed + expm(A * t) @ (x0 - fixed) for t in np.atleast_1d(times)])

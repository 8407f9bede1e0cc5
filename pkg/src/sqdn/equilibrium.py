"""Threshold loads, the index j*, and the unique fixed point of the fluid model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryDegeneracyError, ConfigError, ConsistencyError
from .fluid import drift, mass_functionals
from .params import ModelParams
from .state import FluidState

BISECT_TOL = 1e-13
BISECT_MAX_ITER = 200
LAMBDA_STAR_TOL = 1e-12
BOUNDARY_TOL = 1e-12
RESIDUAL_TOL = 1e-9


def bisect(f, lo: float, hi: float, tol: float = BISECT_TOL, max_iter: int = BISECT_MAX_ITER) -> float:
    """Root of ``f`` on ``[lo, hi]`` assuming ``f(lo) > 0 > f(hi)``.

    Only midpoints are evaluated, so ``f`` may be singular at an endpoint.
    """
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def j_star(p: ModelParams) -> int:
    return int(math.floor(-math.log1p(-p.lam) / math.log1p(p.lam_d)))


def lambda_star(n: int, d: int) -> float:
    """Threshold load: the root in (0, 1] of ``(1 - z)(z d + 1)^n = 1`` (0 for n = 0)."""
    if n < 0 or d < 1:
        raise ValueError(f"need n >= 0 and d >= 1, got n={n}, d={d}")
    if n == 0:
        return 0.0
    if n == 1:
        return 1.0 - 1.0 / d
    # g(0) = 0 and g'(0) = n d - 1 > 0 here, so g is positive just right of 0
    def g(z):
        return (1.0 - z) * (z * d + 1.0) ** n - 1.0

    lo = 1.0 / (2 * d)
    while g(lo) <= 0:
        lo /= 2
    return bisect(g, lo, 1.0, tol=LAMBDA_STAR_TOL)


def interval_index(p: ModelParams, n_max: int = 10_000) -> int:
    """The ``n`` with ``lambda_n* <= lambda < lambda_{n+1}*``, by direct comparison."""
    n = 0
    while n < n_max and lambda_star(n + 1, p.d) <= p.lam:
        n += 1
    return n


def equilibrium_bounds(p: ModelParams) -> tuple[float, float, float]:
    """``(lower, upper)`` bracket on ``L_S(x*)`` and the gap ``L_M(x*) - L_S(x*) = 1/d``."""
    js = j_star(p)
    return js - 1.0 / p.d, js - 1.0 / p.d + 1.0, 1.0 / p.d


def _geometry(p: ModelParams, js: int):
    a = p.lam_d
    x0 = ((1.0 + a) * (1.0 - p.lam) - (1.0 + a) ** (-js)) / a
    return a, x0


def root_function(p: ModelParams, js: int | None = None):
    """The decreasing function of ``x_{j*,j*}`` whose root pins the fixed point (j* >= 1)."""
    js = j_star(p) if js is None else js
    a, x0 = _geometry(p, js)

    def F(v):
        ratio = 1.0 / (v * (1.0 + a))
        return a ** (js - 2) * (1.0 + ratio) ** (js - 1) * (a - 1.0 + a * ratio) * a * x0 - v

    return F


@dataclass
class EquilibriumReport:
    params: ModelParams
    jstar: int
    fixed_point: FluidState
    L_S: float
    L_M: float
    x_jj: float | None
    residual: float

    def support(self, tol: float = 0.0):
        return self.fixed_point.entries(tol)

    def to_dict(self) -> dict:
        return {
            "lambda": self.params.lam,
            "d": self.params.d,
            "I": self.params.buffer,
            "jstar": self.jstar,
            "x_jj": self.x_jj,
            "L_S": self.L_S,
            "L_M": self.L_M,
            "residual": self.residual,
            "support": [list(e) for e in self.support()],
        }


def _check_boundary(p: ModelParams, js: int) -> None:
    for n in (js, js + 1):
        if n == 0:
            continue
        edge = lambda_star(n, p.d)
        if abs(p.lam - edge) <= BOUNDARY_TOL:
            raise BoundaryDegeneracyError(
                f"lambda={p.lam!r} is within {BOUNDARY_TOL} of threshold lambda_{n}*={edge!r}"
            )


def fixed_point(p: ModelParams) -> EquilibriumReport:
    js = j_star(p)
    if p.buffer <= js + 1:
        raise ConfigError(f"buffer I={p.buffer} must exceed j*+1={js + 1}", field="buffer")
    _check_boundary(p, js)

    entries: dict[tuple[int, int], float] = {}
    x_jj = None
    if js == 0:
        entries = {(0, 0): 1.0 - p.lam - 1.0 / p.d, (0, 1): 1.0 / p.d, (1, 1): p.lam}
    else:
        a, x0 = _geometry(p, js)
        F = root_function(p, js)
        x_jj = bisect(F, 0.0, 1.0)
        c = a / ((1.0 + a) * x_jj)
        left = [x0, (a - 1.0 + c) * x0]
        for _ in range(1, js):
            left.append((a + c) * left[-1])
        # the recursion must land back on the root it started from
        left[js] = x_jj
        y_top = a / (1.0 + a)
        y = {i: y_top / (1.0 + a) ** (js - i) for i in range(1, js + 1)}
        right = [1.0 - p.lam - x0, a * (1.0 - p.lam - x0)]
        for i in range(1, js + 1):
            right.append(y[i] - left[i])
        for i, v in enumerate(left):
            entries[(i, js)] = v
        for i, v in enumerate(right):
            entries[(i, js + 1)] = v

    try:
        state = FluidState.from_entries(entries, p.buffer)
    except ValueError as exc:
        raise ConsistencyError(f"reconstructed fixed point is not a valid state: {exc}") from exc
    x = state.x
    residual = float(np.abs(drift(x, p)).max())
    if residual >= RESIDUAL_TOL:
        raise ConsistencyError(f"fixed point residual {residual:.3g} exceeds {RESIDUAL_TOL}")
    L_S, L_M = mass_functionals(x, p.buffer)
    return EquilibriumReport(p, js, state, L_S, L_M, x_jj, residual)

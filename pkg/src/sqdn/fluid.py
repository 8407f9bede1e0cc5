"""Drift of the fluid model and the functionals built on it.

The drift is discontinuous: whenever the dispatcher memory holds no
observation ``<= j`` (an empty memory prefix) jobs are forced onto higher
columns at the boundary rate ``R_j``, and ``G_j`` feeds the diagonal. Both
indicator tests compare against ``EPS_ZERO`` so that the field is a
deterministic function of its floating-point input.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import EPS_ZERO, ModelParams
from .state import check_state, coordinates, from_square, offset, size, to_square


@dataclass(frozen=True)
class Marginals:
    row: np.ndarray        # row[i] = x_{i,.}, servers holding i jobs
    col: np.ndarray        # col[j] = x_{.,j}, servers observed at j
    mem_prefix: np.ndarray  # mem_prefix[j] = sum_{i<=j} x_{.,i}
    tail: np.ndarray       # tail[i] = sum_{k>=i} x_{k,.}
    weighted: np.ndarray   # weighted[j] = sum_{i<=j} (j+1-i) x_{i,.}


def _square(x, buffer):
    return to_square(np.asarray(x, dtype=float), buffer)


def _marginals(X: np.ndarray) -> Marginals:
    row = X.sum(axis=1)
    col = X.sum(axis=0)
    crow = np.cumsum(row)
    return Marginals(
        row=row,
        col=col,
        mem_prefix=np.cumsum(col),
        tail=np.cumsum(row[::-1])[::-1],
        weighted=np.cumsum(crow),
    )


def marginals(x, p: ModelParams) -> Marginals:
    return _marginals(_square(x, p.buffer))


def _boundary_rates(m: Marginals, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectors ``R[j]`` and ``G[j]`` for ``j = 0..I-1`` (``G[0]`` is unused, set to 0)."""
    top = p.buffer
    empty = np.abs(m.mem_prefix[:top]) <= EPS_ZERO
    load = p.d * m.weighted[:top]
    R = np.where(empty, np.maximum(0.0, p.lam * (1.0 - load)), 0.0)
    G = np.where(empty & (load <= 1.0 + EPS_ZERO), p.lam_d * np.cumsum(m.row)[:top], 0.0)
    G[0] = 0.0
    return R, G


def boundary_rate_R(x, j: int, p: ModelParams) -> float:
    """Rate of jobs the dispatcher must route past an empty memory prefix ``0..j``."""
    if not 0 <= j <= p.buffer - 1:
        raise IndexError(f"R_j defined for 0 <= j <= {p.buffer - 1}, got j={j}")
    check_state(x, p.buffer)
    R, _ = _boundary_rates(marginals(x, p), p)
    return float(R[j])


def boundary_rate_G(x, j: int, p: ModelParams) -> float:
    if not 1 <= j <= p.buffer - 1:
        raise IndexError(f"G_j defined for 1 <= j <= {p.buffer - 1}, got j={j}")
    check_state(x, p.buffer)
    _, G = _boundary_rates(marginals(x, p), p)
    return float(G[j])


@lru_cache(maxsize=None)
def _strict_upper(buffer: int) -> np.ndarray:
    return np.triu(np.ones((buffer + 1, buffer + 1)), k=1)


def drift_matrix(X: np.ndarray, p: ModelParams) -> np.ndarray:
    """Drift in square ``(I+1, I+1)`` form; no validity check, used by the integrator."""
    top = p.buffer
    lam, lam_d = p.lam, p.lam_d
    row = X.sum(axis=1)
    col = X.sum(axis=0)
    diag = X.diagonal()

    B = np.zeros_like(X)
    B[:-1, :] = X[1:, :]
    B[1:, :] -= X[1:, :]
    B -= lam_d * X
    dd = -diag + lam_d * (row - diag)
    dd[0] = lam_d * (row[0] - diag[0]) - lam
    dd[1] += lam
    dd[top] = -diag[top]

    if abs(col[0]) > EPS_ZERO:
        # every memory prefix holds mass: R = G = 0 and the drift is affine
        B *= _strict_upper(top)
        B[np.diag_indices(top + 1)] = dd
        return B

    # columns 0..k-1 hold no observations; R_j and G_j vanish for j >= k,
    # so forced assignments only land in columns 1..k
    filled = np.flatnonzero(np.cumsum(col) > EPS_ZERO)
    k = min(int(filled[0]) if len(filled) else top, top)
    crow = np.cumsum(row[:k])
    load = p.d * np.cumsum(crow)
    R = np.zeros(top)
    R[:k] = np.maximum(0.0, lam * (1.0 - load))
    G = np.zeros(top)
    G[:k] = np.where(load <= 1.0 + EPS_ZERO, lam_d * crow, 0.0)
    G[0] = 0.0
    # flow[i, j] = R_{j-1} x_{i,j} / x_{.,j}: assignments into (i,j)-servers;
    # the ratio is taken as 0 on empty columns
    flow = np.zeros_like(X)
    c = col[1:k + 1]
    ratio = np.divide(R[:k], c, out=np.zeros(k), where=c > EPS_ZERO)
    flow[:, 1:k + 1] = X[:, 1:k + 1] * ratio

    B -= flow
    B[1:, 1:] += flow[:-1, :-1]
    B[1:, top] += flow[:-1, top]
    B *= _strict_upper(top)

    fd = flow.diagonal()
    dd[0] += R[0]
    dd[1] += -R[0] - fd[1] - G[1]
    mid = slice(2, top)
    dd[mid] += -fd[mid] + fd[1:top - 1] + G[1:top - 1] - G[mid]
    dd[top] += fd[top - 1] + G[top - 1] + flow[top - 1, top]
    B[np.diag_indices(top + 1)] = dd
    return B


def drift(x, p: ModelParams) -> np.ndarray:
    """Drift vector ``b(x)`` in flat storage order; sums to zero up to rounding."""
    x = np.asarray(x, dtype=float)
    check_state(x, p.buffer)
    return from_square(drift_matrix(to_square(x, p.buffer), p))


def mass_functionals(x, buffer: int | None = None) -> tuple[float, float]:
    """``(L_S, L_M)``: mean jobs per server and mean observation per server."""
    x = np.asarray(x, dtype=float)
    if buffer is None:
        from .state import buffer_of
        buffer = buffer_of(x.shape[-1])
    rows, cols = coordinates(buffer)
    return float(x @ rows), float(x @ cols)


def linear_regime_system(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """``(A, c)`` with ``b(x) = A @ x + c`` on the region ``x_{0,0} > 0``.

    Built term by term from the reduced equations rather than from
    :func:`drift`, so the two can check each other.
    """
    top = p.buffer
    n = size(top)
    lam, lam_d = p.lam, p.lam_d
    A = np.zeros((n, n))
    c = np.zeros(n)

    def k(i, j):
        return offset(i, j, top)

    c[k(0, 0)] = -lam
    for j in range(1, top + 1):
        A[k(0, 0), k(0, j)] += lam_d
    c[k(1, 1)] = lam
    A[k(1, 1), k(1, 1)] -= 1.0
    for j in range(2, top + 1):
        A[k(1, 1), k(1, j)] += lam_d
    for j in range(1, top + 1):
        A[k(0, j), k(1, j)] += 1.0
        A[k(0, j), k(0, j)] -= lam_d
    for i in range(1, top + 1):
        for j in range(i + 1, top + 1):
            A[k(i, j), k(i + 1, j)] += 1.0
            A[k(i, j), k(i, j)] -= 1.0 + lam_d
    for i in range(2, top + 1):
        A[k(i, i), k(i, i)] -= 1.0
        for j in range(i + 1, top + 1):
            A[k(i, i), k(i, j)] += lam_d
    return A, c

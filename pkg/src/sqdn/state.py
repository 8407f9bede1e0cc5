"""Index layout of the state space and the :class:`FluidState` container.

A state assigns a mass ``x[i, j]`` to every pair ``0 <= i <= j <= I``: the
fraction of servers holding ``i`` jobs whose last dispatcher observation is
``j``. States are stored flat, row by row, so ``(i, j)`` lives at offset
``i*(I+1) - i*(i-1)/2 + (j-i)`` and the vector has ``(I+1)(I+2)/2`` entries.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidStateError
from .params import EPS_MASS


def size(buffer: int) -> int:
    return (buffer + 1) * (buffer + 2) // 2


def offset(i: int, j: int, buffer: int) -> int:
    if not 0 <= i <= j <= buffer:
        raise IndexError(f"(i, j) = ({i}, {j}) outside 0 <= i <= j <= {buffer}")
    return i * (buffer + 1) - i * (i - 1) // 2 + (j - i)


@lru_cache(maxsize=None)
def coordinates(buffer: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index of every flat offset, in storage order."""
    rows, cols = np.triu_indices(buffer + 1)
    rows.flags.writeable = False
    cols.flags.writeable = False
    return rows, cols


def buffer_of(n: int) -> int:
    """Invert :func:`size`."""
    buffer = int(round((np.sqrt(8 * n + 1) - 3) / 2))
    if size(buffer) != n:
        raise ValueError(f"{n} is not a triangular state length")
    return buffer


def to_square(x: np.ndarray, buffer: int) -> np.ndarray:
    """Embed a flat state in an ``(I+1, I+1)`` upper-triangular matrix."""
    rows, cols = coordinates(buffer)
    out = np.zeros((buffer + 1, buffer + 1))
    out[rows, cols] = x
    return out


def from_square(m: np.ndarray) -> np.ndarray:
    rows, cols = coordinates(m.shape[0] - 1)
    return m[rows, cols].copy()


def check_state(x: np.ndarray, buffer: int, tol: float = EPS_MASS) -> None:
    x = np.asarray(x, dtype=float)
    if x.shape != (size(buffer),):
        raise InvalidStateError(f"expected {size(buffer)} entries for I={buffer}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidStateError("state has non-finite entries")
    low = x.min()
    if low < -tol:
        rows, cols = coordinates(buffer)
        k = int(np.argmin(x))
        raise InvalidStateError(f"negative mass {low:.3g} at ({rows[k]}, {cols[k]})")
    total = x.sum()
    if abs(total - 1.0) > tol:
        raise InvalidStateError(f"total mass {total!r} differs from 1 by more than {tol}")


@dataclass
class FluidState:
    """A point of the simplex over ``{(i, j): 0 <= i <= j <= I}``."""

    x: np.ndarray
    buffer: int

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        check_state(self.x, self.buffer)

    def __array__(self, dtype=None, copy=None):
        return self.x if dtype is None else self.x.astype(dtype)

    def __getitem__(self, ij):
        i, j = ij
        return self.x[offset(i, j, self.buffer)]

    @classmethod
    def from_entries(cls, entries, buffer: int) -> FluidState:
        """Build from ``{(i, j): mass}`` or an iterable of ``(i, j, mass)``."""
        if isinstance(entries, dict):
            entries = [(i, j, v) for (i, j), v in entries.items()]
        x = np.zeros(size(buffer))
        for i, j, v in entries:
            x[offset(int(i), int(j), buffer)] += v
        return cls(x, buffer)

    @classmethod
    def empty_system(cls, buffer: int) -> FluidState:
        """All servers idle and known to be idle: ``x[0, 0] = 1``."""
        return cls.from_entries({(0, 0): 1.0}, buffer)

    @classmethod
    def random(cls, buffer: int, rng: np.random.Generator, zero_prefix: int = -1) -> FluidState:
        """Uniform draw from the simplex.

        With ``zero_prefix = k >= 0`` every column ``j <= k`` is forced empty,
        which puts the state on the switching surfaces of the drift.
        """
        rows, cols = coordinates(buffer)
        x = rng.dirichlet(np.ones(size(buffer)))
        if zero_prefix >= 0:
            x[cols <= zero_prefix] = 0.0
            x /= x.sum()
        return cls(x, buffer)

    def matrix(self) -> np.ndarray:
        return to_square(self.x, self.buffer)

    def entries(self, tol: float = 0.0):
        """``[(i, j, mass), ...]`` for every entry with mass above ``tol``."""
        rows, cols = coordinates(self.buffer)
        return [(int(i), int(j), float(v)) for i, j, v in zip(rows, cols, self.x) if abs(v) > tol]

    def to_json(self) -> str:
        return json.dumps({"I": self.buffer, "entries": [list(e) for e in self.entries()]})

    @classmethod
    def from_json(cls, text: str) -> FluidState:
        obj = json.loads(text)
        return cls.from_entries(obj["entries"], int(obj["I"]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "j", "value"])
        for i, j, v in self.entries():
            writer.writerow([i, j, repr(v)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, buffer: int) -> FluidState:
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.DictReader(lines)
        return cls.from_entries([(int(r["i"]), int(r["j"]), float(r["value"])) for r in reader], buffer)

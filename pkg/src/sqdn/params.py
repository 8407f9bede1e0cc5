from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

# Indicator tests such as 1{x_{.,j} > 0} treat |v| <= EPS_ZERO as zero.
EPS_ZERO = 1e-10
# Tolerance on simplex membership (total mass and negative entries).
EPS_MASS = 1e-9
# Tolerance on drift conservation (sum of components).
EPS_DRIFT = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Arrival rate per server, number of samples per arrival and buffer size I."""

    lam: float
    d: int
    buffer: int = 20

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam}", field="lambda")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"d must be an integer >= 1, got {self.d}", field="d")
        if int(self.buffer) != self.buffer or self.buffer < 2:
            raise ConfigError(f"buffer must be an integer >= 2, got {self.buffer}", field="buffer")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "buffer", int(self.buffer))

    @property
    def lam_d(self) -> float:
        return self.lam * self.d

    def with_buffer(self, buffer: int) -> ModelParams:
        return ModelParams(self.lam, self.d, buffer)

class InvalidStateError(ValueError):
    """A fluid state is off the simplex (negative mass or total mass != 1)."""


class BoundaryDegeneracyError(ValueError):
    """Load sits on a threshold lambda_n* where the two-column fixed point degenerates."""


class ConsistencyError(RuntimeError):
    """A computed object failed its own defense-in-depth verification."""


class StepRejected(RuntimeError):
    """The integrator produced a state that projection could not repair."""

    def __init__(self, t, coords, message=None):
        self.t = t
        self.coords = coords
        super().__init__(message or f"step rejected at t={t:.6g}; offending coordinates {coords}")


class ConfigError(ValueError):
    """Invalid run configuration. ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)

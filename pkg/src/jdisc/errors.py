"""Exception types shared across the package."""


class JDiscError(Exception):
    """Base class for all package errors."""


class GridError(JDiscError, ValueError):
    """Invalid grid sizes, points outside the closed disc, shape mismatches."""


class StructureError(JDiscError, ValueError):
    """Bad almost complex structure data: singular J + J_st, |A| >= 1,
    singular pullback Jacobian, or evaluation outside the configured box."""


class PreconditionError(JDiscError, ValueError):
    """An operation's stated precondition failed (non-holomorphic phi,
    V(0) != 0, proper disc fed to the probe, ...)."""


class CorrectionError(JDiscError, RuntimeError):
    """The holomorphic complement dictionary could not span the cokernel."""


class NewtonError(JDiscError, RuntimeError):
    """Base class for Newton-solve failures; carries the last residual."""

    def __init__(self, message: str, last_residual: float = float("nan")):
        super().__init__(f"{message} (last residual {last_residual:.3e})")
        self.last_residual = last_residual


class MaxIterationsExceeded(NewtonError):
    pass


class TrustBallExit(NewtonError):
    """An iterate left the configured trust ball around the start disc."""


class LinearSolveFailure(NewtonError):
    """The linearized system could not be solved to tolerance."""


class ConfigError(JDiscError, ValueError):
    """Malformed CLI configuration (unknown keys, wrong types, bad values)."""

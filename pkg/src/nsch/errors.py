"""Exception hierarchy shared by the solver modules."""


class NSCHError(Exception):
    """Base class for every error raised by this package."""


class ContractError(NSCHError, ValueError):
    """An input violates an operation's precondition (shape, finiteness, ...)."""


class IncompatibleDataError(NSCHError, ValueError):
    """Right-hand side fails the solvability condition of a pure Neumann problem."""


class SolverError(NSCHError, RuntimeError):
    """A linear or nonlinear solver did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")
        self.residual = residual


class PotentialDomainError(NSCHError, ValueError):
    """Flory-Huggins potential evaluated at or beyond the pure phases +-1."""


class NewtonError(SolverError):
    """Newton iteration of the phase-field step failed to converge."""


class BarrierError(SolverError):
    """Newton iterates kept hitting the |phi| < 1 barrier; the time step is likely too large."""


class StepError(NSCHError, RuntimeError):
    """A coupled time step was aborted; the input state is left untouched."""


class SnapshotError(NSCHError, IOError):
    """Snapshot file is corrupt, truncated, of the wrong version, or on another grid."""


class ConfigError(NSCHError, ValueError):
    """Run configuration could not be parsed or violates a model hypothesis."""

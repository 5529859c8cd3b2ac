"""Exception hierarchy shared by every module."""


class JCTrajError(Exception):
    """Base class for all package errors."""


class InvalidParams(JCTrajError, ValueError):
    """A parameter set violates its construction invariants."""


class DimensionMismatch(JCTrajError, ValueError):
    """Array shapes do not match the Hilbert space they are used with."""


class TruncationError(JCTrajError):
    """Population leaked into the top of the truncated Fock ladder.

    ``trajectory`` and ``time`` are filled in when the guard trips inside a
    trajectory or an integration, ``None`` otherwise.
    """

    def __init__(self, message, *, trajectory=None, time=None, gamma=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.time = time
        self.gamma = gamma


class ZeroNormJump(JCTrajError):
    """A jump was requested from a state with no photons to emit."""


class TraceDrift(JCTrajError):
    """The integrated density matrix lost unit trace."""


class TimeNotSampled(JCTrajError, KeyError):
    """An observable was requested at a time that was not recorded."""

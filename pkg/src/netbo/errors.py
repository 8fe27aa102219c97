"""Exception hierarchy shared across the library."""


class NetboError(Exception):
    """Base class for all library-specific errors."""


class NotFactorizable(NetboError):
    """Cholesky factorization failed at every jitter level."""


class DomainError(NetboError):
    """Argument outside the mathematical domain of a function."""


class DimensionError(NetboError):
    """Requested dimension exceeds what the generator supports."""


class NonFiniteObjective(NetboError):
    """Objective or gradient returned NaN/inf at a feasible iterate."""


class AllRestartsFailed(NetboError):
    """Every restart of an acquisition maximization failed."""


class CycleOrOrderError(NetboError):
    """A node lists a parent that does not precede it."""


class MultipleLeavesError(NetboError):
    """The network does not have exactly one leaf node."""


class IndexOutOfRange(NetboError):
    """A parent or input-coordinate index is out of range."""


class InfeasiblePoint(NetboError):
    """Point violates the problem bounds or constraint."""


class InconsistentKnownNode(NetboError):
    """Recorded output of a known node disagrees with its analytic value."""


class IOFailure(NetboError):
    """Writing run artifacts to disk failed."""

"""Exception types raised by the scheduling library."""


class EhschedError(Exception):
    """Base class for all library-specific errors."""


# -- timeline construction / feasibility --------------------------------------

class NonPositiveHorizon(EhschedError):
    """Horizon must be strictly positive."""


class ArrivalExceedsCapacity(EhschedError):
    """An energy amount (arrival or initial) is larger than the battery."""


class DuplicateEventTime(EhschedError):
    """Two events of the same kind share one instant."""


class EventBeyondHorizon(EhschedError):
    """Event at or after the horizon can never take effect."""


class MissingInitialFade(EhschedError):
    """The fade list must open with an entry at t=0."""


class LengthMismatch(EhschedError):
    """Schedule length differs from the epoch count."""


# -- distributions -------------------------------------------------------------

class UnsupportedForDiscrete(EhschedError):
    """Operation has no meaning for a discrete fade table."""


class NonPositiveBudget(EhschedError):
    """Cutoff solving needs a strictly positive power budget."""


# -- offline solvers -----------------------------------------------------------

class EmptyEnergy(EhschedError):
    """No energy is ever injected; nothing to schedule."""


class NoConvergence(EhschedError):
    """Iterative solver exhausted its iteration budget."""


# -- departure curve -----------------------------------------------------------

class NegativeTime(EhschedError):
    """Departure curve is only defined for t >= 0."""


class NegativeTarget(EhschedError):
    """Bit targets must be nonnegative."""


class TargetUnreachable(EhschedError):
    """The event stream cannot deliver the requested bits."""


# -- dynamic programming -------------------------------------------------------

class GridTooCoarse(EhschedError):
    """Value table violates monotonicity in stored energy; refine the grids."""


class OutOfMemoryBudget(EhschedError):
    """Estimated value-table size exceeds the configured cap."""


class IncompatibleTable(EhschedError):
    """A lookup table was built for a different time step, horizon or battery."""

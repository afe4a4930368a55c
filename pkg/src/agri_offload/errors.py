"""Exception types shared across the package."""


class AgriOffloadError(Exception):
    """Base class for all package-specific errors."""


class MalformedConfig(AgriOffloadError):
    """A configuration document is missing fields or has wrong types."""


class InvariantViolation(AgriOffloadError):
    """A domain invariant does not hold; the message names it."""


class IoFailure(AgriOffloadError):
    """Reading or writing an artifact file failed."""


class FingerprintMismatch(AgriOffloadError):
    """A trace file was generated from a different scenario."""


class UnknownResource(AgriOffloadError):
    """A resource id outside the scenario's resource set."""


class DoubleCommit(AgriOffloadError):
    """A task was assigned to a resource twice."""


class NotAnAbs(AgriOffloadError):
    """An energy query was made for a resource that has no battery."""


class IncompleteRun(AgriOffloadError):
    """KPIs were requested before every task of the trace was committed."""


class CalledOnSafeAction(AgriOffloadError):
    """Violation severity was requested for an action not expected to violate."""


class InvalidParams(AgriOffloadError):
    """Training hyperparameters outside their legal ranges."""


class VersionMismatch(AgriOffloadError):
    """A table file does not match the expected format version or dimensions."""


class BudgetExceeded(AgriOffloadError):
    """An exact-search instance is larger than the enumeration budget."""


class InfeasibleSchedule(AgriOffloadError):
    """A schedule violates the feasibility constraints."""


class InvalidRange(AgriOffloadError):
    """A sweep axis or range specification is not usable."""

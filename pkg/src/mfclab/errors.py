"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An operation received a non-finite or otherwise illegal input."""


class ConfigError(ValueError):
    """A configuration value violates its invariants."""


class InsufficientSamples(RuntimeError):
    """The estimation window does not yet span a full horizon."""


class ScheduleError(ValueError):
    """A schedule was queried before its first entry or is malformed."""


class DecodeError(ValueError):
    """Base class for datagram decode failures."""


class TruncatedDatagram(DecodeError):
    """Buffer length does not match the fixed wire layout."""


class ForeignPacket(DecodeError):
    """Magic bytes or protocol version do not match."""


class BadKind(DecodeError):
    """Datagram kind byte is not a known message type."""


class ScenarioError(ValueError):
    """Unknown scenario name or unusable scenario definition."""

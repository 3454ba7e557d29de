"""Exception types shared across the package."""


class GridFarmError(Exception):
    """Base class for all gridfarm errors."""


class IllegalTransition(GridFarmError):
    """A state machine was asked to take an edge it does not have."""

    def __init__(self, subject, current, requested):
        self.subject = subject
        self.current = current
        self.requested = requested
        super().__init__(f"{subject}: illegal transition {current} -> {requested}")


class TimeRegression(GridFarmError):
    """A timestamp earlier than the last recorded one was supplied."""


class PastEvent(GridFarmError):
    """An event was scheduled before the current virtual time."""


class InvalidGranularity(GridFarmError):
    """Job granularity must be a positive integer."""


class WallClockExceeded(GridFarmError):
    """The campaign hit its wall-clock limit before finishing.

    Carries the partial campaign result so callers can still emit artifacts.
    """

    def __init__(self, result):
        self.result = result
        super().__init__("wall clock limit exceeded before campaign completion")


class NoMatch(GridFarmError):
    """No computing element advertises room for the job."""


class Throttled(GridFarmError):
    """The broker's submission window is full; retry later, do not fail."""

    def __init__(self, retry_at_ms: int):
        self.retry_at_ms = retry_at_ms
        super().__init__(f"broker throttled, window frees at t={retry_at_ms}ms")


class DuplicateWorker(GridFarmError):
    """A worker id registered while a live session already uses it."""


class InvalidSession(GridFarmError):
    """The session token is unknown or belongs to a dead worker."""


class ZeroWallClock(GridFarmError):
    """Rates are undefined for a zero-length campaign."""


class ZeroWorkers(GridFarmError):
    """Efficiency is undefined without at least one concurrent CPU."""


class UnknownFormat(GridFarmError):
    """Requested report format is not one of json/csv/table."""


class SchemaMismatch(GridFarmError):
    """Two reports cannot be compared because their schemas differ."""


class UnknownPreset(GridFarmError):
    """The named configuration preset does not exist."""


class ConfigError(GridFarmError):
    """A config file failed to parse or validate.

    ``violations`` lists one human-readable string per problem.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid configuration")


class BindFailure(GridFarmError):
    """The master could not bind its listen address."""


class RegistrationFailure(GridFarmError):
    """An output replica could not be registered after retries."""

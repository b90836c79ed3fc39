"""Exception hierarchy shared by every stage of the pipeline."""


class ExposomeError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class MalformedInput(ExposomeError):
    pass


class NoTimestamps(MalformedInput):
    pass


class EmptyTrack(MalformedInput):
    pass


class ArrayLengthMismatch(MalformedInput):
    pass


class UnsupportedConversion(ExposomeError):
    pass


class EmptyInput(ExposomeError):
    pass


class UnknownStation(ExposomeError):
    pass


class HeightOutOfDomain(ExposomeError):
    pass


class MalformedPolyline(MalformedInput):
    pass


class SerializationFailure(ExposomeError):
    pass


class ConfigError(ExposomeError):
    pass


class SourceUnavailable(ExposomeError):
    pass


class QuotaExceeded(SourceUnavailable):
    pass


class NoRouteFound(ExposomeError):
    pass

"""Exception hierarchy shared across the package."""


class ForecastError(Exception):
    """Base class for every error raised by ltsf_dnode."""


class IngestError(ForecastError):
    pass


class SplitError(ForecastError):
    pass


class WindowError(ForecastError):
    pass


class EdaError(ForecastError):
    pass


class DecompError(ForecastError):
    pass


class NormError(ForecastError):
    pass


class NumericsError(ForecastError):
    """Raised when a solver or gradient produces a non-finite value."""


class MetricError(ForecastError):
    pass


class ConfigError(ForecastError):
    pass

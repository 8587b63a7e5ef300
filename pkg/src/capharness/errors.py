"""Exception types shared across the toolkit."""


class CapharnessError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedCorruptionError(CapharnessError):
    """Raised for a corruption kind the catalog does not define."""


class ParameterError(CapharnessError):
    """Raised when a corruption parameter lies outside its legal range."""


class ManifestError(CapharnessError):
    """Raised for unparseable or inconsistent dataset manifests."""


class CaptionFileError(CapharnessError):
    """Raised for malformed caption record files."""


class ProviderError(CapharnessError):
    """Raised when a caption or embedding provider fails."""


class MetricError(CapharnessError):
    """Raised when a metric's preconditions are violated."""


class ReportError(CapharnessError):
    """Raised when a report cannot be rendered from the given results."""


class ConfigError(CapharnessError):
    """Raised for invalid run configurations."""

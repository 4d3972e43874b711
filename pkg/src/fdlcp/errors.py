"""Exception types shared across the package."""


class FdlcpError(Exception):
    """Base class for all package errors."""


class ConfigError(FdlcpError, ValueError):
    """Invalid configuration value or incompatible dimensions."""


class InputError(FdlcpError, ValueError):
    """Malformed input data (wrong shape, non-finite samples, bad file)."""


class MetricError(FdlcpError, ValueError):
    """A metric is undefined for the given inputs."""

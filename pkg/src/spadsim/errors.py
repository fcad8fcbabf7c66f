"""Exception types shared across the simulator."""


class DomainError(ValueError):
    """A physical parameter or argument lies outside its valid domain."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach tolerance within its budget."""


class ScaleGuardError(ValueError):
    """A test-scale routine was asked to materialize too much data."""


class FormatError(ValueError):
    """A file could not be parsed as one of the supported formats."""


class ConfigError(ValueError):
    """Configuration is missing a field or holds an invalid value.

    ``path`` names the offending field as ``section.key``.
    """

    def __init__(self, message, path=None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class EdgeProximityWarning(UserWarning):
    """The return peak sits too close to a TCSPC window edge."""

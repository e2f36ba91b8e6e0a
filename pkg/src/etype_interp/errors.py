"""Exception hierarchy shared by all modules."""


class EtypeError(Exception):
    """Base class for library errors."""


class ConfigError(EtypeError, ValueError):
    """Invalid experiment configuration or parameter combination."""


class OrderError(ConfigError):
    """Bessel order outside nu > -1."""


class EnvelopeError(EtypeError, ValueError):
    """Argument outside the region where the requested accuracy is attainable."""


class SystemError_(EtypeError):
    """A Hermite-Biehler system failed a structural check (zero of E, bad diagonal)."""


class NodeSearchError(EtypeError):
    """Root refinement lost its bracket."""


class PolicyError(EtypeError, ValueError):
    """Truncation policy cannot be honoured (safe region, too few nodes)."""


class TailUnavailable(EtypeError):
    """No analytic tail bound exists for the given decay metadata."""


class ClassMismatch(ConfigError):
    """Target function is not claimed to lie in the requested weighted class."""

"""Exception hierarchy shared by the simulator and the command-line front-end."""


class SimError(Exception):
    """Base class for every error raised by tacitsim."""


class DimensionError(SimError, ValueError):
    """Operand lengths or shapes do not agree."""


class CapacityError(SimError, ValueError):
    """Crossbar dimensions cannot hold the requested mapping."""


class ConfigurationError(SimError, ValueError):
    """A run configuration is invalid or unsupported."""


class CounterOverflowError(ConfigurationError):
    """A local popcount counter is too narrow for the crossbar it serves."""


class UnsupportedBackendError(ConfigurationError):
    """The requested mapping has no execution path on the requested backend."""


class FormatError(SimError, ValueError):
    """A manifest, weights, inputs or report file is malformed."""


class ComparisonError(SimError, ValueError):
    """Reports handed to ``compare`` do not describe the same workload."""

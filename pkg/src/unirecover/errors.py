class UnirecoverError(Exception):
    """Base class for every error raised by unirecover"""


class CapExceededError(UnirecoverError, ValueError):
    """An instance is larger than a configured cap"""


class DimensionMismatchError(UnirecoverError, ValueError):
    pass


class NonFiniteInputError(UnirecoverError, ValueError):
    pass


class ConfigError(UnirecoverError, ValueError):
    """Experiment configuration failed validation"""


class MissingCertificateError(UnirecoverError):
    """An experiment needs a discretization report that is not available"""

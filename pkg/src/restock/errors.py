"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a config value, file, or precondition is invalid.

    The message names the offending field (dotted path for config files)
    or the CSV line for data files.
    """


class EpisodeExhausted(RuntimeError):
    """Raised when a local simulator is stepped past its bound context trajectory."""


class TrainingError(RuntimeError):
    """Raised when an update produces non-finite values."""

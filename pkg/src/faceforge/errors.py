"""Shared exception types."""


class ParameterError(ValueError):
    """Invalid argument value or shape."""


class ModelError(RuntimeError):
    """A model produced output violating its contract."""


class VocabularyError(KeyError):
    """Token or word outside the closed vocabulary."""


class ConfigurationError(ValueError):
    """Inconsistent or unknown configuration."""


class DependencyError(RuntimeError):
    """A required upstream artifact (e.g. checkpoint) is missing."""


class TrainingDivergence(RuntimeError):
    """Loss became non-finite during training."""

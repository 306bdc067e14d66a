"""Exception types shared across the pipeline."""


class SonarPointError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SonarPointError, ValueError):
    """A scene, task or run configuration is invalid."""


class ContractViolation(SonarPointError, ValueError):
    """A caller broke an operation's precondition (bad frame length, time going backwards...)."""

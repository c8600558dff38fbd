"""Exception types shared across the workbench."""


class FedflowError(Exception):
    """Base class for all workbench errors."""


class ConfigError(FedflowError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class DataFormatError(FedflowError):
    """Unparseable or structurally invalid input data (CLI exit code 3)."""


class UndefinedMetricError(FedflowError):
    """A metric is mathematically undefined for the given inputs."""


class NumericError(FedflowError):
    """Non-finite values encountered during differentiable computation.

    ``context`` names the op or parameter segment that produced the value.
    """

    def __init__(self, message: str, context: str = ""):
        super().__init__(message)
        self.context = context


class ProtocolError(FedflowError):
    """Federated exchange violated its contract (shape mismatch, client failure)."""


class DependencyError(FedflowError):
    """A pipeline stage was requested without its upstream artifact."""

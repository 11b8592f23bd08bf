"""Exception types shared across the toolkit."""


class GaugeFlowError(Exception):
    """Base class for all toolkit errors."""


class LogBranch(GaugeFlowError):
    """A group element lies within the cut-locus margin of the principal log."""


class NoConvergence(GaugeFlowError):
    """An iterative method failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedExponent(GaugeFlowError):
    pass


class NotCritical(GaugeFlowError):
    pass


class DimensionMismatch(GaugeFlowError):
    pass


class StepUnderflow(GaugeFlowError):
    pass


class InsufficientData(GaugeFlowError):
    pass


class ConfigError(GaugeFlowError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key

class MecToolkitError(Exception):
    "Base class for every error raised by the toolkit."
    pass


class InvalidParameterError(MecToolkitError, ValueError):
    "Raised when a system or physical parameter is outside its valid range."
    pass


class DivergentTransmissionError(InvalidParameterError):
    "Raised when the channel never leaves outage (beta = 0), so offloading never completes."
    pass


class ConfigError(InvalidParameterError):
    "Raised when a configuration file cannot be turned into system parameters."

    def __init__(self, message, key=None, line=None):
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.key = key
        self.line = line


class InvalidArgumentError(MecToolkitError, ValueError):
    "Raised for unknown policy names and similar bad arguments."
    pass


class PolicyFormatError(MecToolkitError, ValueError):
    "Raised when a policy CSV does not match the expected layout."
    pass


class FeasibilityError(MecToolkitError):
    "Raised when a scheduling decision is applied in a state where it is not allowed."
    pass


class NumericalFailureError(MecToolkitError):
    "Raised when a linear solve or LP fails beyond tolerance."

    def __init__(self, message, residual=None, report=None):
        super().__init__(message)
        self.residual = residual
        self.report = report


class UndefinedDelayError(MecToolkitError):
    "Raised when delay is requested for a system with no arrivals (alpha = 0)."
    pass


class NoThroughputError(MecToolkitError):
    "Raised when no task is ever scheduled, so the local fraction is undefined."
    pass


class SynthesisInfeasibleError(MecToolkitError):
    "Raised when every grid point of the eta search is infeasible."
    pass

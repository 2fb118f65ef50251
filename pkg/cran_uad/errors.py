"""Exception hierarchy shared by the simulator modules."""


class UadError(Exception):
    """Root of every error raised by the simulator."""


class ConfigurationError(UadError, ValueError):
    """Invalid parameters, dimensions, fronthaul budgets or missing calibration."""


class DivergedError(UadError):
    """A message-passing run produced NaN/Inf.

    Carries the iteration at which the state blew up and the trace rows
    collected before that point, so the harness can record the trial.
    """

    def __init__(self, iteration, trace=None, message=None):
        self.iteration = iteration
        self.trace = list(trace or [])
        super().__init__(message or f"GAMP diverged at iteration {iteration}")


class OracleError(UadError):
    """Reference computation could not be carried out (size or quadrature)."""


class HarnessError(UadError):
    """Experiment driver failure: IO, ROC interpolation range, failure rate.

    A failure-rate abort keeps the partial result so the caller can still dump it.
    """

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)

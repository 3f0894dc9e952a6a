"""Exception hierarchy shared by the analysis modules."""

import numpy as np


class PoissonCtlError(Exception):
    """Base class for all errors raised by poissonctl."""


class DimensionError(PoissonCtlError, ValueError):
    pass


class BoundsError(PoissonCtlError, ValueError):
    """A control value lies outside the admissible box."""


class SignalSpanError(PoissonCtlError, ValueError):
    """A time lies outside the span covered by a control signal."""


class GuardViolation(PoissonCtlError):
    """The state left the valid domain of the system.

    ``last_state`` and ``last_time`` describe the last guard-valid point that was
    reached (for a rejected initial state they are ``None``).
    """

    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = None if last_state is None else np.array(last_state, dtype=float)


class StepLimitExceeded(PoissonCtlError):
    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class StepUnderflow(PoissonCtlError):
    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class SamplerExhausted(PoissonCtlError):
    """A rejection sampler could not produce enough guard-valid states."""


class SteeringFailure(PoissonCtlError):
    """The planner ran out of node budget before reaching the goal."""

    def __init__(self, message, best_error, nodes, best_state=None):
        super().__init__(message)
        self.best_error = best_error
        self.nodes = nodes
        self.best_state = best_state

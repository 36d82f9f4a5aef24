"""Exception types raised by the solvers."""


class FlowlabError(Exception):
    """Base class for all flowlab errors."""


class GridError(FlowlabError, ValueError):
    """Invalid domain parameters or a field that does not fit its domain."""


class NonFiniteStateError(FlowlabError, FloatingPointError):
    """A field contains NaN or Inf."""


class NonConvergence(FlowlabError, RuntimeError):
    """Newton iteration hit ``max_iter`` without meeting the tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularLinearSystem(FlowlabError, RuntimeError):
    """The linearised system could not be solved."""


class ScheduleExhausted(FlowlabError, RuntimeError):
    """A Loewner-Nirenberg ladder ran out of boundary levels before settling."""

    def __init__(self, message, last=None, last_change=None):
        super().__init__(message)
        self.last = last
        self.last_change = last_change


class StepCollapse(FlowlabError, RuntimeError):
    """Adaptive time step fell below the collapse threshold."""


class CompatibilityError(FlowlabError, ValueError):
    """Boundary data lacks what a compatibility check needs."""


class EmptyWindow(FlowlabError, ValueError):
    """The admissible curvature window is empty over the whole horizon."""


class ConfigError(FlowlabError, ValueError):
    """A scenario configuration failed validation."""

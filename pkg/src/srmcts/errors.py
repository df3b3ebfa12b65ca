"""Exception types raised by the library."""


class OverfullSequenceError(ValueError):
    """A token arrived after the pre-order sequence was already complete."""


class DepthViolationError(ValueError):
    """An attachment would push the expression tree past the depth limit."""


class UnboundConstantError(ValueError):
    """A constant placeholder has no bound value at evaluation time."""


class ZeroVarianceError(ValueError):
    """Targets have zero variance, so the NRMSE denominator vanishes."""


class TerminalStateError(ValueError):
    """The operation requires a non-terminal state."""


class NotTerminalError(ValueError):
    """The operation requires a terminal (complete) state."""


class IllegalActionError(ValueError):
    """The action is not in the state's action space."""


class InvalidHorizonError(ValueError):
    """Bandit horizon is too small for the number of arms."""


class ConditionViolatedError(ValueError):
    """UCB-extreme hyperparameters fail the validity condition."""


class UndefinedBoundError(ValueError):
    """The regret bound is undefined at this horizon (T too small)."""


class InfiniteDivergenceError(ValueError):
    """KL divergence is infinite because the supports are not nested."""


class BudgetZeroError(ValueError):
    """Search was asked to run with a non-positive evaluation budget."""


class ParseError(ValueError):
    """A CSV dataset file could not be parsed."""


class UnknownBenchmarkError(KeyError):
    """No built-in benchmark with the requested name."""

"""Exception types raised by edlab."""

from __future__ import annotations


class EdlabError(Exception):
    """Base class for all edlab errors."""


class NumericalOverflowError(EdlabError, ArithmeticError):
    """An orbit or accumulator became non-finite during integration."""


class IntegrationBudgetError(EdlabError, ValueError):
    """The requested time span needs more fixed steps than allowed."""


class PreimageUndefinedError(EdlabError, ValueError):
    """A backward map step left the image of the forward map."""

    def __init__(self, step: int, point):
        self.step = step
        self.point = point
        super().__init__(f"preimage undefined at backward step {step} for point {point!r}")


class MissingReversalError(EdlabError, ValueError):
    """The system carries no time-reversal involution."""


class NonPositiveDensityError(EdlabError, ValueError):
    def __init__(self, node, value):
        self.node = node
        self.value = value
        super().__init__(f"density must be positive, got {value!r} at node {node!r}")


class DegenerateTimesError(EdlabError, ValueError):
    """A linear fit needs at least two distinct times."""


class DegenerateOmegaError(EdlabError, ValueError):
    """|omega| == 1: the circle flow has a single non-hyperbolic fixed point."""


class EvaluationError(EdlabError):
    """A function could not be evaluated at a required point."""

    def __init__(self, message: str, point=None, time=None):
        self.point = point
        self.time = time
        super().__init__(message)


class ConfigError(EdlabError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)

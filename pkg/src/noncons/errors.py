"""Exception hierarchy.

Errors split into two families so the command line can map them to exit
codes: :class:`InputError` for bad parameters or malformed requests and
:class:`NumericError` for failures discovered while computing.
"""

from __future__ import annotations

from typing import Any


class NonconsError(Exception):
    """Base class for every error raised by the package."""


class InputError(NonconsError, ValueError):
    """The caller supplied something unusable."""


class NumericError(NonconsError, ArithmeticError):
    """A computation could not be completed.

    ``state`` optionally carries a snapshot (time, coordinates, ...) of
    where things went wrong so it can be dumped for inspection.
    """

    def __init__(self, message: str, state: dict[str, Any] | None = None):
        super().__init__(message)
        self.state = state or {}


class NonFiniteEvaluation(NumericError):
    """A derivative evaluation produced inf or nan."""

    def __init__(self, message: str, index: int | None = None, state=None):
        super().__init__(message, state)
        self.index = index


class MissingAcceleration(InputError):
    pass


class SingularMassMatrix(NumericError):
    pass


class ConditionNumberExceeded(NumericError):
    pass


class UnderdeterminedCoordinate(NumericError):
    pass


class NotReducible(NumericError):
    pass


class NotReduced(SingularMassMatrix):
    """Direct integration was requested for a higher-derivative system.

    The leading-order equations of such a system do not determine the
    third derivative, which shows up as a singular mass problem.
    """


class StepRejectionLimit(NumericError):
    pass


class NonFiniteState(NumericError):
    pass


class TooFewSamples(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NonpositiveTemperature(NumericError):
    pass


class InvalidParams(InputError):
    """Parameter validation failure; ``field`` names the offending parameter."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class SingularTemporalMass(NumericError):
    pass


class CflViolation(InputError):
    pass

"""Exception hierarchy shared by every module.

Data errors (bad inputs, bad files) derive from :class:`DataError`; the CLI
maps them to exit code 2.
"""


class DataError(Exception):
    """Base class for all errors caused by inputs rather than usage."""


class InvalidInputError(DataError, ValueError):
    pass


class InvalidParameterError(DataError, ValueError):
    pass


class InvalidKernelError(InvalidParameterError):
    pass


class ShapeError(DataError, ValueError):
    pass


class NumericError(DataError, ArithmeticError):
    pass


class UndefinedAPError(DataError, ValueError):
    """Average precision requested for a class with no ground truth."""


class EmptyGroundTruthError(DataError, ValueError):
    pass


class PlacementError(DataError, RuntimeError):
    """Scene generator could not place every requested object."""

    def __init__(self, message: str, achieved: int):
        super().__init__(message)
        self.achieved = achieved


class SchemaError(DataError, ValueError):
    """A JSON document does not match its schema; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field

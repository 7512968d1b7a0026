"""Exception and warning classes raised by panelse."""


class PanelSEError(Exception):
    """Base class for all errors raised by this package."""


class PanelDataError(PanelSEError, ValueError):
    pass


class EmptyInput(PanelDataError):
    pass


class ParseFailure(PanelDataError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class MissingCell(PanelDataError):
    def __init__(self, message, unit=None, time=None):
        super().__init__(message)
        self.unit = unit
        self.time = time


class DuplicateCell(PanelDataError):
    def __init__(self, message, unit=None, time=None, row=None):
        super().__init__(message)
        self.unit = unit
        self.time = time
        self.row = row


class AlreadyDemeaned(PanelDataError):
    pass


class ShapeMismatch(PanelSEError, ValueError):
    pass


class SingularDesign(PanelSEError, ValueError):
    """Regressor cross-product matrix is (numerically) rank deficient.

    ``direction`` holds the unit eigenvector of the smallest eigenvalue.
    """

    def __init__(self, message, direction=None, condition=None):
        super().__init__(message)
        self.direction = direction
        self.condition = condition


class SingularVX(SingularDesign):
    pass


class IndexOutOfRange(PanelSEError, IndexError):
    pass


class InvalidConfig(PanelSEError, ValueError):
    pass


class DomainError(PanelSEError, ValueError):
    pass


class TooShort(PanelSEError, ValueError):
    pass


class FoldTooShort(TooShort):
    pass


class InvalidLevel(PanelSEError, ValueError):
    pass


class NonPositiveVariance(PanelSEError, ValueError):
    pass


class SingularSpatialSystem(PanelSEError, ValueError):
    pass


class NonPsdWarning(UserWarning):
    """A covariance estimate has a negative eigenvalue or diagonal entry."""

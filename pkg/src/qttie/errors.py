"""Exception types raised across the package."""

import numpy as np


class ShapeError(ValueError):
    """Operands have incompatible mode structure or lengths."""


class CapacityError(ValueError):
    """A dense reconstruction or assembly would exceed the size guard."""


class DataError(ValueError):
    """Input contains non-finite entries."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix is singular to working precision."""

    def __init__(self, message, pivot_index=None, pivot_value=None):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value


class FormatError(ValueError):
    """A serialized tensor file is malformed or inconsistent."""

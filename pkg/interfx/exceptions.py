"""
Exceptions and warning categories raised by interfx.
"""

from typing import Optional, Tuple, Union

import numpy as np


class InterfxError(Exception):
    """Base class for all interfx errors."""


class PanelDataError(InterfxError, ValueError):
    """
    Invalid panel input.

    Args:
        message: Human readable description
        index: Offending (unit, period) pair or CSV line number, if known
    """

    def __init__(self, message: str, index: Optional[Union[int, Tuple[int, ...]]] = None):
        super().__init__(message)
        self.index = index


class SingularMatrixError(InterfxError, np.linalg.LinAlgError):
    """A matrix that must be inverted is numerically singular."""

    def __init__(
        self,
        message: str,
        smallest_eigenvalue: Optional[float] = None,
        rank: Optional[int] = None,
    ):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue
        self.rank = rank


class IdentificationError(InterfxError, ValueError):
    """A rank condition required for identification does not hold."""


class EstimationError(InterfxError):
    """A fit failed; the message carries the failing configuration."""


class ConvergenceWarning(UserWarning):
    """EM or iterated PC stopped before meeting its tolerance."""


class IdentificationWarning(UserWarning):
    """Identification is weak: tied eigenvalues or rank-deficient loadings."""

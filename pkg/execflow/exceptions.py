# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

class ExecflowException(Exception):
    """Base class for all exceptions in this framework."""
    pass

class ConfigError(ExecflowException):
    """A run configuration or flag value is out of range."""
    pass

class InsufficientMomentsError(ExecflowException):
    """A moment vector is too short to build the requested matrix."""
    pass

class DegenerateMatrixError(ExecflowException):
    """A matrix that must be symmetric positive definite is not, even
    after the one-shot diagonal regularization."""

    def __init__(self, smallest_eigenvalue, message=None):
        self.smallest_eigenvalue = float(smallest_eigenvalue)
        if message is None:
            message = (f"Matrix is not positive definite after regularization; "
                       f"smallest eigenvalue {self.smallest_eigenvalue:.6g}")
        super().__init__(message)

class DegenerateStateError(ExecflowException):
    """A quadratic form used as a denominator vanishes for a state."""
    pass

class NotNormalizedError(ExecflowException):
    """A state does not carry the normalization an operation requires."""
    pass

# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Operator matrices built from moments and the generalized symmetric
eigenproblem that diagonalizes two of them at once.

A matrix <Q_j|f|Q_k> is obtained from the moments <Q_m f> through the
multiplication operator Q_j Q_k = sum_m c^{jk}_m Q_m. Solving
A psi = lambda B psi with B positive definite gives the spectrum of the
Radon-Nikodym ratio of the two quadratic forms.
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import DegenerateMatrixError, DegenerateStateError, InsufficientMomentsError

_logger = logging.getLogger(__name__)

# Relative size of the one-shot diagonal shift, in units of trace(B)/n.
REGULARIZATION = 1e-12

class Normalization(enum.Enum):
    GRAM_UNIT = 'gram_unit'
    RAW = 'raw'

@dataclass
class OperatorMatrix:
    """A matrix <Q_j|f|Q_k> together with where it came from."""
    values: np.ndarray
    provenance: str = ''
    diagnostics: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

@dataclass
class StateVector:
    """A polynomial state psi = sum_k alpha_k Q_k."""
    alpha: np.ndarray
    normalization: Normalization = Normalization.RAW

    def __len__(self):
        return len(self.alpha)

    def evaluate(self, basis, x):
        return basis.resized(len(self.alpha)).evaluate(self.alpha, x)

    def norm2(self, gram):
        """Return <psi|psi> under the given Gram matrix."""
        gram = np.asarray(gram)
        return float(self.alpha @ gram @ self.alpha)

    def normalized(self, gram):
        """Return this state rescaled to unit norm under gram."""
        norm2 = self.norm2(gram)
        if not norm2 > 0:
            raise DegenerateStateError(f"State has non-positive norm {norm2:.6g}")
        return StateVector(self.alpha / np.sqrt(norm2), Normalization.GRAM_UNIT)

@dataclass
class GevSolution:
    """Eigenvalues in ascending order (unless requested otherwise) and the
    matching B-orthonormal eigenvectors, one per column of vectors."""
    eigenvalues: np.ndarray
    vectors: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def state(self, i):
        return StateVector(self.vectors[:, i].copy(), Normalization.GRAM_UNIT)

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

##
# Matrix assembly
#

def build_matrix(basis, moments, n, n_c=None, provenance=''):
    """Return the n x n_c matrix sum_m c^{jk}_m moments_m.

    For monomials this is the Hankel matrix moments_{j+k}.
    """

    n_c = n if n_c is None else n_c
    length = n + n_c - 1
    moments = np.asarray(moments, dtype=float)
    if len(moments) < length:
        raise InsufficientMomentsError(f"A {n}x{n_c} matrix needs {length} moments, "
                                       f"only {len(moments)} available")
    tensor = basis.multiplication_tensor(n, n_c)
    values = tensor @ moments[:length]
    return OperatorMatrix(values, provenance)

def analytic_gram(basis, n):
    """Return the Gram matrix <Q_j|Q_k> from the analytic moments."""
    return build_matrix(basis, basis.analytic_moments(2 * n - 1), n, provenance='analytic gram')

def symmetrized(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return 0.5 * (matrix + matrix.T)

##
# Solvers
#

def factor_spd(matrix):
    """Return the lower Cholesky factor of a symmetric matrix after the
    regularization policy, and a diagnostics dictionary.

    If the smallest eigenvalue is below 1e-12 trace/n, the diagonal is
    shifted by that amount once. If the result still cannot be factored
    DegenerateMatrixError names the smallest eigenvalue.
    """

    matrix = symmetrized(matrix)
    size = matrix.shape[0]
    eigenvalues = scipy.linalg.eigvalsh(matrix)
    smallest, largest = eigenvalues[0], eigenvalues[-1]
    trace = np.trace(matrix)
    if not trace > 0:
        raise DegenerateMatrixError(smallest)

    floor = REGULARIZATION * trace / size
    regularized = False
    if smallest < floor:
        _logger.debug(f"Regularizing matrix with smallest eigenvalue {smallest:.6g} by {floor:.6g}")
        matrix = matrix + floor * np.eye(size)
        regularized = True
    try:
        lower = scipy.linalg.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError:
        raise DegenerateMatrixError(smallest)

    diagnostics = {
        'smallest_eigenvalue': float(smallest),
        'condition': float(largest / max(smallest + (floor if regularized else 0.0), np.finfo(float).tiny)),
        'regularized': regularized,
        'shift': float(floor) if regularized else 0.0,
    }
    return lower, diagnostics

def solve_gev(A, B, descending=False):
    """Solve A psi = lambda B psi for symmetric A and positive definite B.

    B is factored as L L^T, the problem is reduced to the standard
    symmetric eigenproblem for L^-1 A L^-T and the eigenvectors are
    transformed back, so they come out B-orthonormal. Each eigenvector is
    signed so that its largest component is positive.
    """

    A = symmetrized(A)
    lower, diagnostics = factor_spd(B)
    half = scipy.linalg.solve_triangular(lower, A, lower=True)
    reduced = symmetrized(scipy.linalg.solve_triangular(lower, half.T, lower=True))
    eigenvalues, eigenvectors = scipy.linalg.eigh(reduced)
    vectors = scipy.linalg.solve_triangular(lower.T, eigenvectors, lower=False)

    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors = vectors * signs

    if descending:
        eigenvalues = eigenvalues[::-1]
        vectors = vectors[:, ::-1]
    return GevSolution(eigenvalues.copy(), np.ascontiguousarray(vectors), diagnostics)

def localized_state(basis, gram, x0=1.0):
    """Return the unit state alpha ~ G^-1 q(x0), q_k = Q_k(x0), i.e. the
    reproducing kernel state localized at x0."""

    lower, _ = factor_spd(gram)
    q = basis.vander(x0, np.asarray(gram).shape[0])
    y = scipy.linalg.cho_solve((lower, True), q)
    norm2 = q @ y
    return StateVector(y / np.sqrt(norm2), Normalization.GRAM_UNIT)

def rayleigh(num, den, psi):
    """Return <psi|num|psi>/<psi|den|psi>."""
    alpha = psi.alpha if isinstance(psi, StateVector) else np.asarray(psi)
    denominator = alpha @ np.asarray(den) @ alpha
    if not denominator > 0:
        raise DegenerateStateError(f"Denominator quadratic form {denominator} is not positive for this state")
    return float(alpha @ np.asarray(num) @ alpha / denominator)

def christoffel_1d(basis, gram, x):
    """Return K(x) = 1/(q(x)^T G^-1 q(x))."""
    lower, _ = factor_spd(gram)
    q = basis.vander(x, np.asarray(gram).shape[0])
    return float(1.0 / (q @ scipy.linalg.cho_solve((lower, True), q)))

def least_squares_interp(basis, moments, gram, x):
    """Return the least squares approximation sum_jk Q_j(x) G^-1_jk <Q_k I>
    at x. Unlike a Radon-Nikodym ratio it can change sign."""
    size = np.asarray(gram).shape[0]
    lower, _ = factor_spd(gram)
    coeffs = scipy.linalg.cho_solve((lower, True), np.asarray(moments, dtype=float)[:size])
    return float(basis.vander(x, size) @ coeffs)

def projections(gev, gram, psi):
    """Return <psi^[i]|psi>^2 under gram for every eigenvector."""
    overlaps = gev.vectors.T @ np.asarray(gram) @ psi.alpha
    return overlaps ** 2

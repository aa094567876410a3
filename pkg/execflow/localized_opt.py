# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Flow maximization over states localized at a point.

The state localized at y is psi_y = G^-1 q(y), q_k = Q_k(y). Its flow

    I(y) = <psi_y|I|psi_y> / <psi_y|psi_y> = N(y) / D(y)

is a ratio of two polynomials of degree 2n - 2, and D(y) = 1/K(y) where K
is the Christoffel function. Maximizing I or the traded-volume-like
product I K = N / D^2 therefore reduces to finding the real roots of one
polynomial on (0, 1].
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .polybasis import BasisSpec, BasisKind
from .momentstream import Integrand, MeasureKind
from .spectral import build_matrix, factor_spd, rayleigh
from .flowengine import flow_matrices, GramSource

_logger = logging.getLogger(__name__)

GRID_POINTS = 1025
# Left end of the fallback grid; y = 0 itself is the infinite past.
LEFT_END = 1.0 / (GRID_POINTS - 1)
# Roots with |imag| below this, relative to max(1, |root|), are real.
IMAG_TOLERANCE = 1e-8
# Values this close (relative) are ties; ties go to the largest y.
TIE_TOLERANCE = 1e-9
# A stationarity polynomial this small relative to its terms is zero.
FLAT_TOLERANCE = 1e-10

class ScanMethod(enum.Enum):
    ROOTS = 'roots'
    GRID = 'grid'

class Objective(enum.Enum):
    I = 'I'
    IK = 'IK'

@dataclass
class LocalizedScan:
    """Best localization point, the objective value there and every
    stationary point examined."""
    y_star: float
    value: float
    stationary_points: np.ndarray
    method: ScanMethod
    christoffel: float = float('nan')

@dataclass
class LocalizedObservables:
    """Flow, Christoffel value, price and time in the state localized at
    the best point."""
    scan: LocalizedScan
    I: float
    K: float
    P: float
    T: float
    diagnostics: dict = field(default_factory=dict)

def _default_basis(moments, basis):
    if basis is not None:
        return basis
    return BasisSpec(BasisKind.SHIFTED_LEGENDRE, len(moments), 1.0)

def _ratio_series(basis, moments, gram):
    """Return the series N and D with I(y) = N(y)/D(y)."""
    gram = np.asarray(gram, dtype=float)
    n = gram.shape[0]
    A = build_matrix(basis, moments, n).values
    lower, _ = factor_spd(gram)
    inverse = scipy.linalg.cho_solve((lower, True), np.eye(n))
    tensor = basis.multiplication_tensor(n)
    numerator = np.einsum('jkm,jk->m', tensor, inverse @ A @ inverse)
    denominator = np.einsum('jkm,jk->m', tensor, inverse)
    return basis.series(numerator), basis.series(denominator)

def rn_interpolate(moments, gram, y, basis=None):
    """Return I(y), the flow of the state localized at y."""
    basis = _default_basis(moments, basis)
    numerator, denominator = _ratio_series(basis, moments, gram)
    return float(numerator(y) / denominator(y))

def _objective(numerator, denominator, objective):
    if objective is Objective.I:
        return lambda y: numerator(y) / denominator(y)
    return lambda y: numerator(y) / denominator(y) ** 2

def _stationary_series(numerator, denominator, objective):
    power = 1 if objective is Objective.I else 2
    left = numerator.deriv() * denominator
    right = numerator * denominator.deriv()
    stationary = left - power * right
    scale = max(np.abs(left.coef).max(), np.abs(right.coef).max())
    return stationary, scale

def _real_roots(series):
    roots = series.roots()
    real = roots.real[np.abs(roots.imag) < IMAG_TOLERANCE * np.maximum(1.0, np.abs(roots))]
    return np.sort(real[(real > 0.0) & (real <= 1.0)])

def _best(candidates, values):
    """Index of the best candidate; ties go to the largest y."""
    top = values.max()
    tol = TIE_TOLERANCE * max(abs(top), np.finfo(float).tiny)
    ties = np.flatnonzero(values >= top - tol)
    return int(ties[np.argmax(candidates[ties])])

def _grid_scan(function):
    grid = np.linspace(0.0, 1.0, GRID_POINTS)[1:]
    values = function(grid)
    best = _best(grid, values)
    return grid[best], values[best]

def scan_localized(moments, gram, objective=Objective.I, basis=None, method=ScanMethod.ROOTS):
    """Maximize I or I K over y in (0, 1].

    With the root method every real root of the stationarity polynomial
    in that range is compared with y = 1 and the left end of the grid. If the root solver
    fails the 1025 point grid is used and the scan is flagged as such.
    """

    objective = Objective(objective)
    method = ScanMethod(method)
    basis = _default_basis(moments, basis)
    numerator, denominator = _ratio_series(basis, moments, gram)
    function = _objective(numerator, denominator, objective)

    if method is ScanMethod.ROOTS:
        stationary, scale = _stationary_series(numerator, denominator, objective)
        if np.abs(stationary.coef).max() <= FLAT_TOLERANCE * scale:
            points = np.zeros(0)
        else:
            try:
                points = _real_roots(stationary)
            except np.linalg.LinAlgError as exc:
                _logger.warning(f"Root finding failed ({exc}); scanning a grid instead")
                method = ScanMethod.GRID
        if method is ScanMethod.ROOTS:
            candidates = np.concatenate([[LEFT_END], points, [1.0]])
            values = function(candidates)
            if np.all(np.isfinite(values)):
                best = _best(candidates, values)
                return LocalizedScan(float(candidates[best]), float(values[best]), points, method,
                                     float(1.0 / denominator(candidates[best])))
            _logger.warning("Non-finite objective at a stationary point; scanning a grid instead")
            method = ScanMethod.GRID

    y_star, value = _grid_scan(function)
    return LocalizedScan(float(y_star), float(value), np.zeros(0), method, float(1.0 / denominator(y_star)))

def maximize_I_localized(moments, gram, basis=None, method=ScanMethod.ROOTS):
    """Return the localization point of largest flow."""
    return scan_localized(moments, gram, Objective.I, basis, method)

def maximize_IK(moments, gram, basis=None, method=ScanMethod.ROOTS):
    """Return the localization point of largest I K. The Christoffel
    factor K favours points around which much time has been observed."""
    return scan_localized(moments, gram, Objective.IK, basis, method)

def localized_observables(ms, n, objective=Objective.I, gram_source=GramSource.SAMPLED):
    """Return flow, price and time of the best localized state of a
    snapshot; the localized counterpart of the eigenvector observables."""

    basis = ms.basis
    A, gram = flow_matrices(ms, n, gram_source)
    moments = ms[Integrand.ONE, MeasureKind.DV]
    scan = scan_localized(moments, gram, objective, basis)

    lower, _ = factor_spd(gram)
    psi = scipy.linalg.cho_solve((lower, True), basis.vander(scan.y_star, n))
    price = build_matrix(basis, ms[Integrand.PRICE, MeasureKind.DV], n)
    time = build_matrix(basis, ms[Integrand.TIME, MeasureKind.DV], n)
    return LocalizedObservables(
        scan=scan,
        I=rayleigh(A, gram, psi),
        K=scan.christoffel,
        P=rayleigh(price, A, psi),
        T=min(0.0, rayleigh(time, A, psi)),
        diagnostics={'stationary_points': len(scan.stationary_points)},
    )

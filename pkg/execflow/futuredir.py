# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Directional indicators from the state of maximal flow.

A state psi defines the density matrix rho of "from psi until now": for a
polynomial f,

    Tr(rho <Q|df/dt|Q>) = f(t_now) - <psi|f|psi>

which is integration by parts in matrix form. With f = P I and the flow
at t_now set to the future estimate lambda_max, the trace splits into a
boundary term and a term in <Q|(dP/dt)(dV/dt)|Q>, the latter obtained
from a product approximation over a larger basis of n_d functions.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .momentstream import Integrand, MeasureKind
from .spectral import (OperatorMatrix, StateVector, Normalization, build_matrix, analytic_gram,
                       factor_spd)
from .conventions import default_nd
from .exceptions import ConfigError, NotNormalizedError

_logger = logging.getLogger(__name__)

# Allowed deviation of <psi|psi> from 1 under the analytic Gram.
NORM_TOLERANCE = 1e-9

@dataclass
class DensityMatrix:
    """rho_jk with sum_jk rho_jk Q_j Q_k = W(x)/x, W(x) = tau int_0^x psi^2."""
    rho: np.ndarray
    source_state: StateVector
    basis: object

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.rho
        return self.rho.astype(dtype)

    def represented(self, x):
        """Return r(x) = sum_jk rho_jk Q_j(x) Q_k(x)."""
        q = self.basis.vander(x, self.rho.shape[0])
        return np.einsum('...j,jk,...k->...', q, self.rho, q)

    def trace(self, matrix):
        """Return Tr(rho M) for an n x n matrix M; M need not be symmetric."""
        return float(np.einsum('jk,kj->', self.rho, np.asarray(matrix)))

@dataclass
class DirectionalReading:
    """dir_pdi = boundary - product. Values are in currency times shares
    per second."""
    dir_dpi: float
    dir_pdi: float
    boundary: float
    product: float

def density_matrix_since(psi, basis):
    """Return the density matrix of psi, which must have unit norm under
    the analytic Gram of basis.

    rho = tau int_0^1 a(s) a(s)^T ds, where a(s) are the coefficients of
    psi(s x). The entries are polynomials of degree 2n - 2 in s, so an
    n-point Gauss-Legendre rule integrates them exactly.
    """

    alpha = psi.alpha if isinstance(psi, StateVector) else np.asarray(psi, dtype=float)
    n = len(alpha)
    basis = basis.resized(n)
    gram = analytic_gram(basis, n).values
    norm2 = float(alpha @ gram @ alpha)
    if abs(norm2 - 1.0) > NORM_TOLERANCE:
        raise NotNormalizedError(f"State has norm {norm2:.12g} under the analytic Gram, expected 1")

    nodes, weights = basis.gauss_nodes(n)
    rho = np.zeros((n, n))
    for s, w in zip(nodes, weights):
        a = basis.rescale_op(s).T @ alpha
        rho += w * np.outer(a, a)
    rho *= basis.tau
    rho = 0.5 * (rho + rho.T)

    if not isinstance(psi, StateVector):
        psi = StateVector(alpha, Normalization.GRAM_UNIT)
    return DensityMatrix(rho, psi, basis)

def represented_polynomial(dm, x):
    """Return r(x) for a DensityMatrix; r(1) = 1 for a unit state."""
    return dm.represented(x)

def product_approx(A, gram_d, B):
    """Return A gram_d^-1 B, the approximation of <Q_j|f g|Q_k> from the
    rectangular matrices A = <Q_j|f|Q_q> (n x n_d) and B = <Q_r|g|Q_k>
    (n_d x n). The result is not symmetrized."""

    A, gram_d, B = np.asarray(A), np.asarray(gram_d), np.asarray(B)
    n, n_d = A.shape
    if n_d < n:
        raise ConfigError(f"Product approximation needs n_d >= n, found n_d={n_d}, n={n}")
    if gram_d.shape != (n_d, n_d) or B.shape != (n_d, n):
        raise ConfigError(f"Shapes {A.shape}, {gram_d.shape}, {B.shape} do not chain")
    lower, _ = factor_spd(gram_d)
    values = A @ scipy.linalg.cho_solve((lower, True), B)
    return OperatorMatrix(values, provenance=f"product approximation n_d={n_d}")

def rate_product(ms, n, n_d=None):
    """Return the approximation of <Q_j|(dP/dt)(dV/dt)|Q_k> from the dP
    and dV moments of a snapshot."""

    n_d = default_nd(n) if n_d is None else n_d
    basis = ms.basis
    A = build_matrix(basis, ms[Integrand.ONE, MeasureKind.DP], n, n_d, provenance='<Q|dP/dt|Q>')
    B = build_matrix(basis, ms[Integrand.ONE, MeasureKind.DV], n_d, n, provenance='<Q|dV/dt|Q>')
    return product_approx(A, analytic_gram(basis, n_d), B)

def dir_dpi(fs, last_price):
    """Return lambda_max (P_last - P_maxI)."""
    return float(fs.lambda_max * (last_price - fs.P_maxI))

def dir_pdi(fs, rho, prod, last_price):
    """Return the directional reading of the density matrix of psi_maxI.

    The boundary term comes from the trace identity with f = P I and the
    flow at t_now replaced by lambda_max; it equals dir_dpi. The sign
    follows dir_dpi, so a rising price against the maximal flow state is
    positive.
    """
    boundary = dir_dpi(fs, last_price)
    product = float(np.einsum('jk,kj->', np.asarray(rho), np.asarray(prod)))
    return DirectionalReading(dir_dpi=boundary, dir_pdi=boundary - product, boundary=boundary, product=product)

def directional(ms, fs, n, n_d=None):
    """Return the DirectionalReading for a snapshot and its FlowSolution.

    psi_maxI comes out of the eigenproblem normalized against the sampled
    Gram; it is renormalized against the analytic one first.
    """

    psi = fs.psi_max.normalized(analytic_gram(ms.basis, n))
    dm = density_matrix_since(psi, ms.basis)
    prod = rate_product(ms, n, n_d)
    reading = dir_pdi(fs, dm, prod, fs.last_price)
    _logger.debug(f"dir_dpi={reading.dir_dpi:.6g} dir_pdi={reading.dir_pdi:.6g} "
                  f"product={reading.product:.6g}")
    return reading

# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Polynomial bases on the unit interval for the exponential time map.

Time is mapped to x = exp((t - t_now)/tau) so the present sits at x = 1
and the past decays toward x = 0. Moments carry the weight omega = x,
which makes omega dt = tau dx, so every analytic integral below is a
plain integral over [0, 1].

Two bases are supported. Shifted Legendre polynomials Q_m(x) = P_m(2x - 1)
are the working basis; monomials x^m are kept as a cross-check for small
sizes where their conditioning is still acceptable.
"""

import enum
import functools

import numpy as np
from numpy.polynomial import Legendre, Polynomial
from numpy.polynomial import legendre as leg
from numpy.polynomial import polynomial as poly

from .exceptions import ConfigError

UNIT_DOMAIN = [0.0, 1.0]

class BasisKind(enum.Enum):
    SHIFTED_LEGENDRE = 'shifted_legendre'
    MONOMIAL = 'monomial'

class BasisSpec:
    """A polynomial basis Q_0 .. Q_{size-1} on [0, 1] with time scale tau
    in seconds.

    Instances are immutable and hashable; the operators below are cached
    per (kind, size, tau) and returned as read-only arrays, so a basis
    may be shared freely between threads.
    """

    def __init__(self, kind=BasisKind.SHIFTED_LEGENDRE, size=1, tau=1.0):
        try:
            self._kind = BasisKind(kind)
        except ValueError:
            raise ConfigError(f"Unknown basis kind {kind!r}")
        self._size = int(size)
        self._tau = float(tau)
        if self._size < 1:
            raise ConfigError(f"Basis size must be at least 1, found {self._size}")
        if not self._tau > 0:
            raise ConfigError(f"Basis time scale must be positive, found {self._tau}")

    @property
    def kind(self):
        return self._kind

    @property
    def size(self):
        return self._size

    @property
    def tau(self):
        return self._tau

    @property
    def is_legendre(self):
        return self._kind is BasisKind.SHIFTED_LEGENDRE

    def _key(self):
        return (self._kind, self._size, self._tau)

    def __eq__(self, other):
        return isinstance(other, BasisSpec) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"BasisSpec({self._kind.value}, size={self._size}, tau={self._tau})"

    def resized(self, size):
        """Return the same basis with a different number of functions."""
        return BasisSpec(self._kind, size, self._tau)

    ##
    # Polynomials in this basis
    #

    def series(self, coeffs):
        """Return a numpy polynomial object for coefficients in this basis."""
        if self.is_legendre:
            return Legendre(coeffs, domain=UNIT_DOMAIN)
        return Polynomial(coeffs)

    def evaluate(self, coeffs, x):
        """Return sum_m coeffs_m Q_m(x). Shifted Legendre series use the
        Clenshaw three-term recurrence, monomials use Horner's rule."""
        return self.series(coeffs)(x)

    def vander(self, x, size=None):
        """Return the values Q_m(x), m < size, along the last axis."""
        deg = (size or self._size) - 1
        x = np.asarray(x, dtype=float)
        if self.is_legendre:
            res = leg.legvander(2.0 * x - 1.0, deg)
        else:
            res = poly.polyvander(x, deg)
        # numpy promotes a scalar x to shape (1,).
        return res[0] if x.ndim == 0 else res

    def product(self, p, q):
        """Return the coefficients of the pointwise product p*q."""
        if self.is_legendre:
            res = leg.legmul(p, q)
        else:
            res = poly.polymul(p, q)
        return _pad(res, len(p) + len(q) - 1)

    def antiderivative(self, coeffs):
        """Return q with q(0) = 0 and q' = p, one coefficient longer than p."""
        # lbnd is given in domain coordinates, i.e. x = 0.
        res = self.series(coeffs).integ(lbnd=0.0).coef
        return _pad(res, len(coeffs) + 1)

    def to_monomial(self, coeffs):
        """Return the coefficients of the same polynomial in powers of x."""
        if not self.is_legendre:
            return np.array(coeffs, dtype=float)
        return _pad(self.series(coeffs).convert(kind=Polynomial).coef, len(coeffs))

    def from_monomial(self, coeffs):
        """Return the coefficients in this basis of sum_m coeffs_m x^m."""
        if not self.is_legendre:
            return np.array(coeffs, dtype=float)
        res = Polynomial(coeffs).convert(kind=Legendre, domain=UNIT_DOMAIN).coef
        return _pad(res, len(coeffs))

    ##
    # Operators
    #

    def rescale_op(self, a, b=0.0):
        """Return R with Q_j(a x + b) = sum_k R_jk Q_k(x).

        R is lower triangular in degree and exact for polynomials. For
        monomials row j holds the binomial expansion of (a x + b)^j; for
        shifted Legendre polynomials the rows follow the Legendre
        three-term recurrence in the variable 2(a x + b) - 1.
        """
        return _rescale_op(self._kind, self._size, float(a), float(b))

    def multiply_op(self, j, k):
        """Return c^{jk} with Q_j Q_k = sum_m c^{jk}_m Q_m, length j+k+1."""
        if j + k > self._size - 1:
            raise ValueError(f"Product degree {j + k} exceeds basis size {self._size}")
        return self.product(_unit(j), _unit(k))

    def multiplication_tensor(self, n, n_c=None):
        """Return C[j, k, m] = c^{jk}_m for j < n, k < n_c, m < n + n_c - 1."""
        return _multiplication_tensor(self._kind, n, n if n_c is None else n_c)

    def generator(self):
        """Return G with x d/dx Q_j = sum_k G_jk Q_k. It does not depend on
        tau and generates the time shift: R(exp(-s), 0) = exp(-s G)."""
        return _generator(self._kind, self._size)

    def ddt_op(self):
        """Return D with d/dt Q_j(x(t)) = sum_k D_jk Q_k(x).

        On the exponential map d/dt = (x/tau) d/dx, so D = G/tau and is
        degree preserving.
        """
        return self.generator() / self._tau

    def analytic_moments(self, size=None):
        """Return the exact <Q_m> = tau int_0^1 Q_m(x) dx for m < size."""
        size = size or self._size
        if self.is_legendre:
            res = np.zeros(size)
            res[0] = self._tau
            return res
        return self._tau / (np.arange(size) + 1.0)

    def weighted_moments(self, coeffs, size=None):
        """Return the exact <Q_m g> = tau int_0^1 Q_m(x) g(x) dx for a
        polynomial g given by its coefficients in this basis."""
        size = size or self._size
        coeffs = np.asarray(coeffs, dtype=float)
        if self.is_legendre:
            res = np.zeros(size)
            count = min(size, len(coeffs))
            res[:count] = coeffs[:count] / (2.0 * np.arange(count) + 1.0)
            return self._tau * res
        m = np.arange(size)[:, None]
        k = np.arange(len(coeffs))[None, :]
        return self._tau * (coeffs[None, :] / (m + k + 1.0)).sum(axis=1)

    def gauss_nodes(self, count):
        """Return Gauss-Legendre nodes and weights on [0, 1], exact for
        polynomials of degree <= 2*count - 1."""
        return _gauss_unit(count)

    ##
    # Time advancement of moment blocks
    #

    def decay(self, block, a):
        """Return block @ R(a, 0).T for a stack of coefficient rows.

        For monomials R(a, 0) is diagonal. For shifted Legendre the product
        is applied through values at size-point Gauss-Legendre nodes, which
        is exact here because every Q_j(a x) Q_k(x) has degree below 2*size.
        """
        block = np.asarray(block, dtype=float)
        if not self.is_legendre:
            return block * a ** np.arange(self._size, dtype=float)
        nodes, _ = _gauss_unit(self._size)
        scaled = leg.legvander(2.0 * a * nodes - 1.0, self._size - 1)
        return (block @ _node_projector(self._size)) @ scaled

##
# Cached helpers
#

def _unit(j):
    res = np.zeros(j + 1)
    res[j] = 1.0
    return res

def _pad(coeffs, size):
    """Truncate or zero-pad a coefficient sequence to the given length.
    numpy trims trailing zeros from series arithmetic."""
    res = np.zeros(size)
    count = min(size, len(coeffs))
    res[:count] = coeffs[:count]
    return res

def _frozen(array):
    array.flags.writeable = False
    return array

@functools.lru_cache(maxsize=4096)
def _rescale_op(kind, size, a, b):
    res = np.zeros((size, size))
    res[0, 0] = 1.0
    if kind is BasisKind.MONOMIAL:
        for j in range(1, size):
            res[j, 1:] = a * res[j - 1, :-1]
            res[j] += b * res[j - 1]
        return _frozen(res)

    # P_j(y) with y = a u + c where u = 2x - 1 is the Legendre variable.
    c = a + 2.0 * b - 1.0
    if size > 1:
        res[1, :2] = [c, a]
    for j in range(1, size - 1):
        y_pj = c * res[j] + a * _pad(leg.legmulx(res[j]), size)
        res[j + 1] = ((2 * j + 1) * y_pj - j * res[j - 1]) / (j + 1)
    return _frozen(res)

@functools.lru_cache(maxsize=64)
def _multiplication_tensor(kind, n, n_c):
    length = n + n_c - 1
    res = np.zeros((n, n_c, length))
    mul = leg.legmul if kind is BasisKind.SHIFTED_LEGENDRE else poly.polymul
    for j in range(n):
        for k in range(n_c):
            res[j, k] = _pad(mul(_unit(j), _unit(k)), length)
    return _frozen(res)

@functools.lru_cache(maxsize=64)
def _generator(kind, size):
    res = np.zeros((size, size))
    if kind is BasisKind.MONOMIAL:
        res[np.diag_indices(size)] = np.arange(size)
        return _frozen(res)
    x = Legendre.identity(domain=UNIT_DOMAIN)
    for j in range(1, size):
        res[j] = _pad((x * Legendre.basis(j, domain=UNIT_DOMAIN).deriv()).coef, size)
    return _frozen(res)

@functools.lru_cache(maxsize=64)
def _gauss_unit(count):
    nodes, weights = leg.leggauss(count)
    return _frozen(0.5 * (nodes + 1.0)), _frozen(0.5 * weights)

@functools.lru_cache(maxsize=64)
def _node_projector(size):
    # P[k, i] = (2k+1) Q_k(x_i) w_i maps coefficients to node values of
    # the dual functions; see BasisSpec.decay.
    nodes, weights = _gauss_unit(size)
    values = leg.legvander(2.0 * nodes - 1.0, size - 1)
    res = (values * weights[:, None]).T * (2.0 * np.arange(size) + 1.0)[:, None]
    return _frozen(res)


# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Moving price statistics and volume weighted price levels.

The price levels of order n_p are the nodes of the Gaussian quadrature of
the traded volume as a measure on price: the roots of the degree n_p
orthogonal polynomial of that measure. They are obtained as generalized
eigenvalues of the Hankel matrices <P^(j+k+1)> and <P^(j+k)>.
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as poly
from scipy.special import comb

from .momentstream import Integrand, MeasureKind
from .spectral import solve_gev
from .conventions import DEFAULT_PRICE_LEVELS
from .exceptions import ExecflowException, ConfigError

_logger = logging.getLogger(__name__)

# Smallest eigenvalue of the scaled Hankel matrix, relative to the
# largest, for the measure to count as supporting that order.
RANK_TOLERANCE = 1e-11

class PriceWeighting(enum.Enum):
    TIME = 'time'
    VOLUME = 'volume'

_WEIGHTING_MEASURE = {
    PriceWeighting.TIME: MeasureKind.DT,
    PriceWeighting.VOLUME: MeasureKind.DV,
}

class LevelPosition(enum.Enum):
    BELOW_MIN = 'below_min'
    ABOVE_MAX = 'above_max'
    INSIDE = 'inside'

@dataclass
class PriceQuadrature:
    """Nodes (currency, ascending) and weights (volume per node) of a
    Gaussian quadrature of order n_p."""
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self):
        return len(self.nodes)

    def moments(self, k_max):
        """Return sum_i w_i nodes_i^k for k = 0..k_max."""
        return (self.weights[:, None] * self.nodes[:, None] ** np.arange(k_max + 1)).sum(axis=0)

def moving_stats(ms, weighting=PriceWeighting.VOLUME):
    """Return the exponential moving average price and its standard
    deviation under time or volume weighting."""

    measure = _WEIGHTING_MEASURE[PriceWeighting(weighting)]
    total = ms[Integrand.ONE, measure][0]
    if not total > 0:
        raise EmptyMeasureError(f"No {PriceWeighting(weighting).value} weight accumulated")
    mean = ms[Integrand.PRICE, measure][0] / total
    variance = ms[Integrand.PRICE_SQ, measure][0] / total - mean * mean
    return float(mean), float(np.sqrt(max(0.0, variance)))

def _shifted_moments(moments, shift, scale):
    """Return the moments of (y - shift)/scale from the moments of y."""
    res = np.zeros(len(moments))
    for k in range(len(moments)):
        i = np.arange(k + 1)
        res[k] = (comb(k, i) * moments[:k + 1] * (-shift) ** (k - i)).sum() / scale ** k
    return res

def _achievable_order(hankel):
    for order in range(hankel.shape[0], 0, -1):
        eigenvalues = scipy.linalg.eigvalsh(hankel[:order, :order])
        if eigenvalues[0] > RANK_TOLERANCE * eigenvalues[-1]:
            return order
    return 0

def price_quadrature(powers, n_p=DEFAULT_PRICE_LEVELS, center=0.0, scale=1.0, support=None):
    """Return the order n_p Gaussian quadrature of a price measure.

    Parameters
    ----------
    powers: array of float
        Moments <z^k>, k = 0 .. at least 2 n_p - 1, of the measure in the
        variable z = (P - center)/scale. With the defaults these are the
        raw moments <P^k>.
    n_p: int
        Number of price levels.
    center, scale: float
        Map from z back to price.
    support: (float, float), optional
        Smallest and largest z carrying weight. The moments are shifted
        onto [-1, 1] over this range before the Hankel matrices are built;
        without it they are standardized by their mean and deviation.
    """

    n_p = int(n_p)
    if n_p < 1:
        raise ConfigError(f"Number of price levels must be positive, found {n_p}")
    powers = np.asarray(powers, dtype=float)
    if len(powers) < 2 * n_p:
        raise ConfigError(f"{n_p} price levels need {2 * n_p} power moments, only {len(powers)} given")
    if not powers[0] > 0:
        raise EmptyMeasureError("Price measure has no weight")

    if support is not None:
        low, high = support
        shift, half_width = 0.5 * (low + high), 0.5 * (high - low)
    else:
        shift = powers[1] / powers[0]
        half_width = np.sqrt(max(0.0, powers[2] / powers[0] - shift * shift)) if len(powers) > 2 else 0.0
    if not half_width > 0:
        half_width = 1.0
    moments = _shifted_moments(powers[:2 * n_p], shift, half_width)

    index = np.add.outer(np.arange(n_p), np.arange(n_p))
    hankel = moments[index]
    achievable = _achievable_order(hankel)
    if achievable < n_p:
        raise DegenerateMeasureError(achievable, n_p)
    gev = solve_gev(moments[index + 1], hankel)

    nodes = gev.eigenvalues
    # Christoffel weights 1/K(y_i, y_i); eigenvector i is the normalized
    # kernel polynomial at its node.
    values = np.array([poly.polyval(nodes[i], gev.vectors[:, i]) for i in range(n_p)])
    weights = 1.0 / values ** 2

    prices = center + scale * (shift + half_width * nodes)
    order = np.argsort(prices)
    return PriceQuadrature(prices[order], weights[order])

def quadrature_from_stream(ms, n_p=DEFAULT_PRICE_LEVELS):
    """Return the price levels of the volume a MomentSet has accumulated."""
    powers = ms.price_powers
    if powers is None:
        raise ConfigError("This MomentSet does not accumulate price powers")
    if powers.center is None:
        raise EmptyMeasureError("No trades accumulated")
    if 2 * n_p - 1 > powers.order:
        raise ConfigError(f"{n_p} price levels need power moments up to {2 * n_p - 1}, "
                          f"only {powers.order} accumulated")
    center = powers.center
    low, high = powers.price_range
    support = ((low - center) / center, (high - center) / center)
    return price_quadrature(powers.relative_powers(), n_p, center=center, scale=center, support=support)

def level_crossing(quad, price):
    """Locate a price relative to the outermost levels."""
    if price < quad.nodes[0]:
        return LevelPosition.BELOW_MIN
    if price > quad.nodes[-1]:
        return LevelPosition.ABOVE_MAX
    return LevelPosition.INSIDE

##
# Exceptions
#

class EmptyMeasureError(ExecflowException):
    """The weighting measure has accumulated nothing."""
    pass

class DegenerateMeasureError(ExecflowException):
    """The measure has too few distinct prices for the requested order."""

    def __init__(self, achievable_order, requested_order=None):
        self.achievable_order = achievable_order
        self.requested_order = requested_order
        super().__init__(f"Price measure supports at most {achievable_order} levels"
                         + (f", {requested_order} requested" if requested_order is not None else ''))

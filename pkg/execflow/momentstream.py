# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Exponentially weighted polynomial moments of a trade stream.

A moment <Q_m f> over the measure dmu is the sum over past ticks of
Q_m(x_l) f_l omega(x_l) dmu_l with x_l = exp((t_l - t_now)/tau) and
omega = x. Moving t_now forward by delta rescales every x by
a = exp(-delta/tau) and multiplies omega by a, so each moment vector v
becomes a R(a, 0) v; a new tick then lands at x = 1 where every basis
polynomial equals one.

The measures are dt (seconds since the previous tick), dP (price change
since the previous tick) and dV (shares of the tick). The first tick of a
stream has dt = dP = 0.
"""

import enum
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.special import comb

from .conventions import NS_PER_SECOND, DEFAULT_PRICE_POWER_ORDER
from .exceptions import ExecflowException, ConfigError

_logger = logging.getLogger(__name__)

class TradeTick(NamedTuple):
    """One executed trade. Time is integer nanoseconds since midnight."""
    t: int
    price: float
    shares: float

class Integrand(enum.Enum):
    ONE = '1'
    PRICE = 'P'
    PRICE_SQ = 'P2'
    # (t - t_now)/tau, i.e. ln x on the exponential map.
    TIME = 'T'

class MeasureKind(enum.Enum):
    DT = 'dt'
    DP = 'dP'
    DV = 'dV'

DEFAULT_FAMILIES = (
    (Integrand.ONE, MeasureKind.DT),
    (Integrand.PRICE, MeasureKind.DT),
    (Integrand.PRICE_SQ, MeasureKind.DT),
    (Integrand.ONE, MeasureKind.DV),
    (Integrand.PRICE, MeasureKind.DV),
    (Integrand.PRICE_SQ, MeasureKind.DV),
    (Integrand.TIME, MeasureKind.DV),
    (Integrand.ONE, MeasureKind.DP),
)

# Ticks buffered before a MomentSet folds them in unprompted.
DEFAULT_FLUSH_TICKS = 4096

_INTEGRANDS = list(Integrand)
_MEASURES = list(MeasureKind)

class PricePowerMoments:
    """Exponential moving averages of volume weighted price powers.

    Only the Q_0 moment is kept, so time advancement is a plain decay by
    a. Powers are accumulated for the relative price z = (P - c)/c about
    the first traded price c; raw powers of P are recovered on demand.
    """

    def __init__(self, order=DEFAULT_PRICE_POWER_ORDER):
        self._order = int(order)
        if self._order < 0:
            raise ConfigError(f"Price power order must be non-negative, found {self._order}")
        self._values = np.zeros(self._order + 1)
        self._center = None
        self._low = None
        self._high = None

    @property
    def order(self):
        return self._order

    @property
    def center(self):
        return self._center

    @property
    def price_range(self):
        """Smallest and largest price seen, or None before the first tick."""
        if self._center is None:
            return None
        return (self._low, self._high)

    def decay(self, a):
        self._values *= a

    def add(self, price, shares):
        self.add_many(np.array([price], dtype=float), np.array([shares], dtype=float), np.ones(1))

    def add_many(self, prices, shares, weights):
        """Add ticks with the given decay weights omega_l in one step."""
        if self._center is None:
            self._center = float(prices[0])
            self._low = self._high = self._center
        self._low = min(self._low, float(prices.min()))
        self._high = max(self._high, float(prices.max()))
        z = (prices - self._center) / self._center
        self._values += (shares * weights) @ (z[:, None] ** np.arange(self._order + 1))

    def relative_powers(self):
        """Return <z^k>_dV for k = 0..order."""
        return self._values.copy()

    def raw_powers(self, k_max=None):
        """Return <P^k>_dV for k = 0..k_max via P^k = c^k (1 + z)^k."""
        k_max = self._order if k_max is None else int(k_max)
        if k_max > self._order:
            raise ConfigError(f"Requested power {k_max} exceeds the accumulated order {self._order}")
        res = np.zeros(k_max + 1)
        if self._center is None:
            return res
        for k in range(k_max + 1):
            i = np.arange(k + 1)
            res[k] = self._center ** k * (comb(k, i) * self._values[:k + 1]).sum()
        return res

    def copy(self):
        other = PricePowerMoments(self._order)
        other._values = self._values.copy()
        other._center, other._low, other._high = self._center, self._low, self._high
        return other

class MomentSet:
    """All moment families of one ticker at a common reference time.

    The families are stored as one block, one row of basis.size
    coefficients per (integrand, measure) pair. Ticks are buffered and
    folded into the block lazily: the block is brought to the latest
    time with one rescale, then the buffered ticks are added at their
    decayed positions x_l in a single vectorized step. Every read
    flushes the buffer first. A MomentSet has a single writer; use
    copy() to hand an independent snapshot to another thread.

    Parameters
    ----------
    basis: ``BasisSpec``
        Basis and time scale. Its size is the moment length M.
    families: sequence of (Integrand, MeasureKind)
        The families to maintain. A TIME family needs the ONE family of
        the same measure.
    price_power_order: int or None
        Highest power of price to accumulate under dV, or None to skip.
    flush_ticks: int
        Largest number of buffered ticks before they are folded in
        without waiting for a read.
    """

    def __init__(self, basis, families=DEFAULT_FAMILIES, price_power_order=DEFAULT_PRICE_POWER_ORDER,
                 flush_ticks=DEFAULT_FLUSH_TICKS):
        self._basis = basis
        self._families = tuple(families)
        if len(set(self._families)) != len(self._families):
            raise ConfigError("Moment families must be distinct")
        self._index = {family: row for row, family in enumerate(self._families)}
        self._flush_ticks = int(flush_ticks)
        if self._flush_ticks < 1:
            raise ConfigError(f"Flush size must be at least 1, found {self._flush_ticks}")

        self._time_rows = []
        for row, (integrand, measure) in enumerate(self._families):
            if integrand is Integrand.TIME:
                base = self._index.get((Integrand.ONE, measure))
                if base is None:
                    raise ConfigError(f"Family {integrand.name},{measure.name} needs ONE,{measure.name}")
                self._time_rows.append((row, base))

        self._integrand_idx = np.array([_INTEGRANDS.index(i) for i, _ in self._families], dtype=int)
        self._measure_idx = np.array([_MEASURES.index(m) for _, m in self._families], dtype=int)

        self._block = np.zeros((len(self._families), basis.size))
        # The block holds moments at _block_time; ticks after it wait in
        # _pending until the next flush brings everything to _reference_time.
        self._block_time = None
        self._reference_time = None
        self._pending = []
        self._first_time = None
        self._last_tick = None
        self._tick_count = 0
        self._price_powers = None if price_power_order is None else PricePowerMoments(price_power_order)

    ##
    # Properties
    #

    @property
    def basis(self):
        return self._basis

    @property
    def tau(self):
        return self._basis.tau

    @property
    def families(self):
        return self._families

    @property
    def reference_time(self):
        return self._reference_time

    @property
    def first_time(self):
        return self._first_time

    @property
    def last_tick(self):
        return self._last_tick

    @property
    def tick_count(self):
        return self._tick_count

    @property
    def pending_count(self):
        """Number of ticks not yet folded into the block."""
        return len(self._pending)

    @property
    def elapsed_ns(self):
        """Time covered by the stream, first tick to the reference time."""
        if self._first_time is None:
            return 0
        return self._reference_time - self._first_time

    @property
    def price_powers(self):
        self.flush()
        return self._price_powers

    @property
    def block(self):
        """A copy of all moments, one family per row."""
        self.flush()
        return self._block.copy()

    def moments(self, integrand, measure):
        """Return a copy of the moment vector <Q_m f> for one family."""
        try:
            row = self._index[(integrand, measure)]
        except KeyError:
            raise KeyError(f"Moment family {integrand.name},{measure.name} is not maintained")
        self.flush()
        return self._block[row].copy()

    def __getitem__(self, family):
        return self.moments(*family)

    def __contains__(self, family):
        return family in self._index

    ##
    # Updates
    #

    def advance(self, new_time):
        """Move the reference time forward to new_time (ns) and return self.

        Every moment vector v becomes a R(a, 0) v with a = exp(-delta/tau);
        TIME families additionally shift by -s times their base family,
        s = delta/tau, because ln x itself moves by -s. The rescale itself
        happens at the next flush.
        """

        new_time = int(new_time)
        if self._reference_time is None:
            self._reference_time = self._block_time = new_time
            return self
        if new_time < self._reference_time:
            raise ChronologyError(f"Cannot move moments back in time from {self._reference_time} "
                                  f"to {new_time}")
        self._reference_time = new_time
        return self

    def on_tick(self, tick):
        """Advance to the tick's time and buffer its contribution.
        Returns self."""

        t = int(tick.t)
        if self._reference_time is not None and t < self._reference_time:
            raise ChronologyError(f"Tick at {t} ns precedes reference time {self._reference_time} ns")
        self.advance(t)

        last = self._last_tick
        if last is None:
            dt = dp = 0.0
            self._first_time = t
        else:
            dt = (t - last.t) / NS_PER_SECOND
            dp = tick.price - last.price

        self._pending.append((t, float(tick.price), float(tick.shares), dt, dp))
        self._last_tick = tick
        self._tick_count += 1
        if len(self._pending) >= self._flush_ticks:
            self.flush()
        return self

    def flush(self):
        """Fold the buffered ticks into the block at the reference time."""

        if self._block_time is None or (self._block_time == self._reference_time and not self._pending):
            return self
        s = (self._reference_time - self._block_time) / NS_PER_SECOND / self._basis.tau
        if s > 0:
            a = math.exp(-s)
            block = a * self._basis.decay(self._block, a)
            for row, base in self._time_rows:
                block[row] -= s * block[base]
            self._block = block
            if self._price_powers is not None:
                self._price_powers.decay(a)
        self._block_time = self._reference_time

        if self._pending:
            times, prices, shares, dt, dp = (np.array(column) for column in zip(*self._pending))
            self._pending = []
            s_l = (times - self._reference_time) / NS_PER_SECOND / self._basis.tau
            x = np.exp(s_l)
            integrands = np.stack([np.ones_like(prices), prices, prices * prices, s_l])
            measures = np.stack([dt, dp, shares])
            weights = integrands[self._integrand_idx] * measures[self._measure_idx] * x
            self._block += weights @ self._basis.vander(x)
            if self._price_powers is not None:
                self._price_powers.add_many(prices, shares, x)
        return self

    def copy(self):
        """Return an independent snapshot."""
        self.flush()
        other = MomentSet.__new__(MomentSet)
        other.__dict__.update(self.__dict__)
        other._block = self._block.copy()
        other._pending = []
        other._time_rows = list(self._time_rows)
        if self._price_powers is not None:
            other._price_powers = self._price_powers.copy()
        return other

    snapshot = copy

    def _restore(self, block, reference_time, first_time, last_tick, tick_count):
        self._block = np.array(block, dtype=float)
        self._block_time = self._reference_time = reference_time
        self._pending = []
        self._first_time = first_time
        self._last_tick = last_tick
        self._tick_count = tick_count

def price_power_moments(ms, k_max=None):
    """Return <P^k>_dV for k = 0..k_max from a MomentSet."""
    if ms.price_powers is None:
        raise ConfigError("This MomentSet does not accumulate price powers")
    return ms.price_powers.raw_powers(k_max)

def recompute_oracle(history, basis, families=DEFAULT_FAMILIES,
                     price_power_order=DEFAULT_PRICE_POWER_ORDER, at_time=None):
    """Build a MomentSet by summing the whole history directly at the
    final time (or at_time), with no incremental updates."""

    ms = MomentSet(basis, families, price_power_order)
    if not history:
        return ms

    times = np.array([tick.t for tick in history], dtype=np.int64)
    prices = np.array([tick.price for tick in history], dtype=float)
    shares = np.array([tick.shares for tick in history], dtype=float)
    final = int(times[-1] if at_time is None else at_time)

    s = (times - final) / NS_PER_SECOND / basis.tau
    x = np.exp(s)
    dt = np.concatenate([[0.0], np.diff(times) / NS_PER_SECOND])
    dp = np.concatenate([[0.0], np.diff(prices)])
    values = basis.vander(x)

    integrands = {
        Integrand.ONE: np.ones_like(prices),
        Integrand.PRICE: prices,
        Integrand.PRICE_SQ: prices * prices,
        Integrand.TIME: s,
    }
    measures = {MeasureKind.DT: dt, MeasureKind.DP: dp, MeasureKind.DV: shares}

    block = np.zeros((len(families), basis.size))
    for row, (integrand, measure) in enumerate(families):
        block[row] = (integrands[integrand] * measures[measure] * x) @ values

    ms._restore(block, final, int(times[0]), history[-1], len(history))

    powers = ms.price_powers
    if powers is not None:
        center = prices[0]
        z = (prices - center) / center
        powers._center = float(center)
        powers._low, powers._high = float(prices.min()), float(prices.max())
        powers._values = (shares * x) @ (z[:, None] ** np.arange(powers.order + 1))
    return ms

##
# Exceptions
#

class ChronologyError(ExecflowException):
    """A tick or time advance would move a moment set backwards in time."""
    pass

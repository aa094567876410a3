# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Strategies as position changes, their P&L, and a flow driven backtest.

A strategy is a sequence of signed share changes dS at fill prices P. For
a closed strategy, sum dS = 0, the P&L has two equal forms

    -sum P_i dS_i  =  sum S_i (P_{i+1} - P_i)

where S_i is the position after the i-th change. An open position is
closed by a final change of -S at a mark price, which turns the realized
P&L into the realized plus unrealized one.
"""

import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .engine import TickerPipeline, FlowConfig
from .flowengine import TriggerState
from .conventions import LEDGER_COLUMNS, COMMENT_PREFIX, format_number
from .exceptions import ExecflowException, ConfigError

_logger = logging.getLogger(__name__)

# Net position, relative to the gross shares traded, treated as flat.
CLOSURE_TOLERANCE = 1e-9

class EventKind(enum.Enum):
    OPEN_LONG = 'open_long'
    CLOSE_LONG = 'close_long'
    OPEN_SHORT = 'open_short'
    CLOSE_SHORT = 'close_short'

@dataclass(frozen=True)
class StrategyEvent:
    """dS shares bought (dS > 0) or sold (dS < 0) at fill_price."""
    t: int
    dS: float
    fill_price: float

    def __post_init__(self):
        if not (math.isfinite(self.dS) and math.isfinite(self.fill_price)):
            raise ConfigError(f"Strategy event must be finite, found dS={self.dS} price={self.fill_price}")
        if not self.fill_price > 0:
            raise ConfigError(f"Fill price must be positive, found {self.fill_price}")

class Ledger:
    """Time ordered strategy events and the running position."""

    def __init__(self, events=()):
        self._events = []
        for event in events:
            self.add(event)

    def add(self, event):
        if self._events and event.t < self._events[-1].t:
            raise ConfigError(f"Event at {event.t} precedes the last event at {self._events[-1].t}")
        self._events.append(event)
        return self

    def trade(self, t, dS, fill_price):
        return self.add(StrategyEvent(int(t), float(dS), float(fill_price)))

    @property
    def events(self):
        return list(self._events)

    def __len__(self):
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def copy(self):
        return Ledger(self._events)

    @property
    def position(self):
        return math.fsum(event.dS for event in self._events)

    def position_at(self, t):
        """Return S(t), the sum of dS over events at or before t."""
        return math.fsum(event.dS for event in self._events if event.t <= t)

    def positions(self):
        """Return the position after each event."""
        return np.cumsum([event.dS for event in self._events])

    @property
    def gross_shares(self):
        return math.fsum(abs(event.dS) for event in self._events)

    @property
    def gross_notional(self):
        return math.fsum(abs(event.dS) * event.fill_price for event in self._events)

    @property
    def cash(self):
        """Return -sum P dS, the cash account of the strategy."""
        return -math.fsum(event.fill_price * event.dS for event in self._events)

    def is_closed(self):
        return abs(self.position) <= CLOSURE_TOLERANCE * max(1.0, self.gross_shares)

    def write_tsv(self, stream):
        """Write t_ns, dS, fill_price, S_after, pnl_after per event, with
        the position marked at its own fill price."""
        stream.write(f"{COMMENT_PREFIX} {chr(9).join(LEDGER_COLUMNS)}\n")
        cash = 0.0
        position = 0.0
        for event in self._events:
            cash -= event.fill_price * event.dS
            position += event.dS
            fields = [str(event.t), format_number(event.dS), format_number(event.fill_price),
                      format_number(position), format_number(cash + position * event.fill_price)]
            stream.write('\t'.join(fields) + '\n')

def pnl_cash(ledger):
    """Return -sum P dS of a closed ledger."""
    if not ledger.is_closed():
        raise ClosureViolatedError(ledger.position)
    return ledger.cash

def close_out(ledger, mark_price, t=None):
    """Return a copy of the ledger with the open position closed at
    mark_price, by default at the time of the last event."""
    res = ledger.copy()
    position = ledger.position
    if position == 0:
        return res
    t = ledger.events[-1].t if t is None else t
    return res.trade(t, -position, mark_price)

def pnl_position_form(positions, prices):
    """Return sum S_l (P_{l+1} - P_l) for positions S_l held from price
    P_l to P_{l+1}; the last position must be flat."""
    positions = np.asarray(positions, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if positions.shape != prices.shape:
        raise ConfigError(f"{len(positions)} positions do not match {len(prices)} prices")
    if len(positions) == 0:
        return 0.0
    scale = max(1.0, np.abs(positions).max())
    if abs(positions[-1]) > CLOSURE_TOLERANCE * scale:
        raise ClosureViolatedError(positions[-1])
    return float(math.fsum(positions[:-1] * np.diff(prices)))

def ledger_pnl_position_form(ledger):
    """Return the position form of the P&L of a closed ledger."""
    return pnl_position_form(ledger.positions(), [event.fill_price for event in ledger])

##
# Backtest
#

@dataclass
class BacktestSummary:
    """Event counts and P&L of a backtest. Fees are included in pnl."""
    events: Counter = field(default_factory=Counter)
    evaluations: int = 0
    abstentions: int = 0
    fees: float = 0.0
    pnl: float = 0.0

class _LiquidityStrategy:
    """Flat, long or short one unit, driven by the trigger of each
    evaluation; enters in the direction of dir_pdi."""

    def __init__(self, fee_per_share=0.0, slippage=0.0):
        self.ledger = Ledger()
        self.summary = BacktestSummary()
        self.fee_per_share = float(fee_per_share)
        self.slippage = float(slippage)
        self.position = 0
        self.last_record = None

    def _fill(self, t_ns, last_price, dS, kind):
        price = last_price + math.copysign(self.slippage, dS)
        self.ledger.trade(t_ns, dS, price)
        self.summary.fees += abs(dS) * self.fee_per_share
        self.summary.events[kind] += 1
        self.position += dS
        _logger.debug(f"{kind.value} {dS:+d} @ {price} at {t_ns}")

    def __call__(self, _ticker, record):
        self.summary.evaluations += 1
        self.last_record = record
        if self.position == 0:
            if record.trigger is not TriggerState.ENTER_OK:
                return
            direction = np.sign(record.dir_pdi)
            if direction == 0 or not np.isfinite(direction):
                self.summary.abstentions += 1
                return
            if direction > 0:
                self._fill(record.t_ns, record.last_price, 1, EventKind.OPEN_LONG)
            else:
                self._fill(record.t_ns, record.last_price, -1, EventKind.OPEN_SHORT)
        elif record.trigger is TriggerState.EXIT_OK:
            kind = EventKind.CLOSE_LONG if self.position > 0 else EventKind.CLOSE_SHORT
            self._fill(record.t_ns, record.last_price, -self.position, kind)

    def flatten(self, t_ns, last_price):
        """Close out an open position at the end of the stream, with fees
        and slippage like any other fill."""
        if self.position == 0:
            return
        dS = -self.position
        kind = EventKind.CLOSE_LONG if dS < 0 else EventKind.CLOSE_SHORT
        self.ledger = close_out(self.ledger, last_price + math.copysign(self.slippage, dS), t_ns)
        self.summary.fees += abs(dS) * self.fee_per_share
        self.summary.events[kind] += 1
        self.position = 0
        _logger.debug(f"{kind.value} {dS:+d} at the end of the stream, {t_ns}")

def liquidity_backtest(ticks, config=None, fee_per_share=0.0, slippage=0.0, ticker='backtest'):
    """Trade one unit on the flow triggers of a single tick stream.

    FLAT goes LONG or SHORT on ENTER_OK with the sign of dir_pdi, and
    abstains when dir_pdi is zero; a position goes FLAT on EXIT_OK. A
    position still open at the end is closed at the last traded price,
    paying fees and slippage.

    Returns (ledger, summary); the ledger is closed.
    """

    config = config or FlowConfig()
    strategy = _LiquidityStrategy(fee_per_share, slippage)
    pipeline = TickerPipeline(ticker, config, strategy)
    last_tick = None
    for tick in ticks:
        pipeline.on_tick(tick)
        last_tick = tick

    if last_tick is not None:
        strategy.flatten(last_tick.t, last_tick.price)
    ledger = strategy.ledger
    strategy.summary.pnl = pnl_cash(ledger) - strategy.summary.fees
    _logger.info(f"Backtest of {ticker}: {len(ledger)} events, {strategy.summary.evaluations} evaluations, "
                 f"P&L {strategy.summary.pnl:.6g}")
    return ledger, strategy.summary

##
# Exceptions
#

class ClosureViolatedError(ExecflowException):
    """The strategy still holds a position where a closed one is needed."""

    def __init__(self, position):
        self.position = position
        super().__init__(f"Strategy is not closed, open position {position:.6g}")

# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Reading and generating trade tick streams.

Tick files have one trade per line with at least four whitespace or
comma separated fields: ticker, execution time in nanoseconds since
midnight, price and shares, e.g.

    NVDA    31556271038450  156.26    3

The column positions are configurable. Files ending in .gz are
decompressed transparently.
"""

import datetime
import enum
import gzip
import logging
import re
from dataclasses import dataclass, field

import numpy as np
from dateutil import tz as dateutil_tz
from dateutil.parser import isoparse

from .momentstream import TradeTick
from .conventions import NS_PER_SECOND, DEFAULT_COLUMNS, parse_columns, format_tick_line
from .exceptions import ExecflowException, ConfigError

_logger = logging.getLogger(__name__)

_SEPARATORS = re.compile(r'[\s,]+')

# Fraction of malformed lines above which a file is rejected.
MALFORMED_LIMIT = 0.001

ROUND_LOT = 100

DEFAULT_TIMEZONE = 'America/New_York'

class ChronologyPolicy(enum.Enum):
    SKIP = 'skip'
    ABORT = 'abort'

@dataclass(frozen=True)
class ColumnMap:
    """Zero-based positions of the four tick fields on a line."""
    ticker: int = 0
    time: int = 1
    price: int = 2
    shares: int = 3

    def __post_init__(self):
        cols = (self.ticker, self.time, self.price, self.shares)
        if any(col < 0 for col in cols) or len(set(cols)) != 4:
            raise ConfigError(f"Column map {cols} must hold four distinct non-negative indexes")

    @classmethod
    def parse(cls, spec=DEFAULT_COLUMNS, **overrides):
        """Build a map from a "ticker:time:price:shares" string. Named
        overrides, e.g. price=5, take precedence over the string."""
        ticker, time, price, shares = parse_columns(spec)
        values = dict(ticker=ticker, time=time, price=price, shares=shares)
        values.update({name: value for name, value in overrides.items() if value is not None})
        return cls(**values)

    @property
    def width(self):
        return max(self.ticker, self.time, self.price, self.shares) + 1

@dataclass
class IngestStats:
    """Counters for one pass over a tick file."""
    lines: int = 0
    ticks: int = 0
    skipped_zero: int = 0
    skipped_out_of_order: int = 0
    skipped_odd_lot: int = 0
    skipped_ticker: int = 0
    malformed: list = field(default_factory=list)

    @property
    def malformed_fraction(self):
        return len(self.malformed) / self.lines if self.lines else 0.0

class TickSource:
    """A tick file, how to read it, and which tickers to keep.

    Parameters
    ----------
    path: str
        Text file, optionally gzip compressed (".gz" suffix).
    columns: ``ColumnMap``, optional
    tickers: iterable of str, optional
        Keep only these tickers. All tickers are kept if not given.
    chronology: ChronologyPolicy
        What to do with a tick earlier than the previous one of its ticker.
    keep_odd_lots: bool
        Pass through trades of fewer than 100 shares.
    malformed_limit: float
        Maximum tolerated fraction of malformed lines.
    """

    def __init__(self, path, columns=None, tickers=None, chronology=ChronologyPolicy.SKIP,
                 keep_odd_lots=True, malformed_limit=MALFORMED_LIMIT):
        self.path = str(path)
        self.columns = columns or ColumnMap()
        self.tickers = frozenset(tickers) if tickers else None
        self.chronology = ChronologyPolicy(chronology)
        self.keep_odd_lots = bool(keep_odd_lots)
        self.malformed_limit = float(malformed_limit)
        self.stats = IngestStats()

    def open(self):
        if self.path.endswith('.gz'):
            return gzip.open(self.path, 'rt')
        return open(self.path, 'r')

    def __iter__(self):
        return parse_stream(self)

def parse_stream(source):
    """Yield (ticker, TradeTick) in file order, applying the source's
    filters. Counters are kept in source.stats."""

    stats = source.stats = IngestStats()
    cols = source.columns
    last_time = {}

    with source.open() as stream:
        for line_no, line in enumerate(stream, 1):
            text = line.strip()
            if not text or text.startswith('#'):
                continue
            stats.lines += 1
            fields = _SEPARATORS.split(text)
            try:
                ticker = fields[cols.ticker]
                t_ns = int(fields[cols.time])
                price = float(fields[cols.price])
                shares = float(fields[cols.shares])
            except (IndexError, ValueError) as exc:
                stats.malformed.append((line_no, str(exc)))
                _logger.warning(f"{source.path}:{line_no}: malformed line: {exc}")
                continue

            if source.tickers is not None and ticker not in source.tickers:
                stats.skipped_ticker += 1
                continue
            if not (shares > 0 and price > 0):
                stats.skipped_zero += 1
                continue
            if not source.keep_odd_lots and shares < ROUND_LOT:
                stats.skipped_odd_lot += 1
                continue

            previous = last_time.get(ticker)
            if previous is not None and t_ns < previous:
                if source.chronology is ChronologyPolicy.ABORT:
                    raise IngestError(f"{source.path}:{line_no}: {ticker} time {t_ns} precedes {previous}")
                stats.skipped_out_of_order += 1
                continue
            last_time[ticker] = t_ns

            stats.ticks += 1
            yield ticker, TradeTick(t_ns, price, shares)

    if stats.malformed_fraction > source.malformed_limit:
        first = ', '.join(str(line_no) for line_no, _ in stats.malformed[:5])
        raise IngestError(f"{source.path}: {len(stats.malformed)} of {stats.lines} lines are malformed "
                          f"(first at lines {first})")
    _logger.info(f"{source.path}: {stats.ticks} ticks from {stats.lines} lines; skipped "
                 f"{stats.skipped_zero} zero, {stats.skipped_out_of_order} out of order, "
                 f"{stats.skipped_odd_lot} odd lot, {len(stats.malformed)} malformed")

def write_ticks(ticks, stream, ticker):
    """Write ticks of one ticker in the canonical tab separated form."""
    for tick in ticks:
        stream.write(format_tick_line(ticker, tick.t, tick.price, tick.shares))

def session_datetime(t_ns, session_date, timezone=DEFAULT_TIMEZONE):
    """Return the exchange-local datetime of a tick time.

    session_date is a date or an ISO 8601 string; t_ns counts nanoseconds
    since local midnight of that date.
    """
    zone = dateutil_tz.gettz(timezone)
    if zone is None:
        raise ConfigError(f"Unknown time zone {timezone!r}")
    if isinstance(session_date, str):
        session_date = isoparse(session_date).date()
    midnight = datetime.datetime.combine(session_date, datetime.time(0), tzinfo=zone)
    return midnight + datetime.timedelta(microseconds=int(t_ns) // 1000)

##
# Synthetic streams
#

class SynthKind(enum.Enum):
    CONSTANT = 'constant'
    SPIKE = 'spike'
    STEP_PRICE = 'step_price'
    SINUSOID_VOLUME = 'sinusoid_volume'

@dataclass
class SynthSpec:
    """Recipe for a synthetic stream of evenly spaced ticks.

    Every kind starts from a constant background of `volume` shares per
    tick every `dt` seconds at `price`, optionally with a linear price
    drift (currency per second) and uniform relative volume jitter.
    """
    kind: SynthKind = SynthKind.CONSTANT
    count: int = 10_000
    dt: float = 1.0
    volume: float = 5.0
    price: float = 100.0
    seed: int = 0
    jitter: float = 0.0
    drift: float = 0.0
    start_ns: int = 34_200 * NS_PER_SECOND
    # spike: all of spike_volume trades at the tick spike_index.
    spike_index: int = None
    spike_volume: float = 0.0
    # step_price: the price jumps to step_price at the tick step_index.
    step_index: int = None
    step_price: float = None
    # sinusoid_volume: volume * (1 + amplitude sin(2 pi t / period)).
    period: float = 60.0
    amplitude: float = 0.5

    def __post_init__(self):
        self.kind = SynthKind(self.kind)
        if self.count < 1 or not self.dt > 0:
            raise ConfigError(f"Synthetic stream needs count >= 1 and dt > 0, found {self.count}, {self.dt}")

def synth_stream(spec):
    """Return the ticks described by a SynthSpec. The same spec, seed
    included, always gives the same ticks."""

    rng = np.random.default_rng(spec.seed)
    step = int(round(spec.dt * NS_PER_SECOND))
    index = np.arange(spec.count)
    times = spec.start_ns + index * step
    seconds = index * step / NS_PER_SECOND

    volumes = np.full(spec.count, float(spec.volume))
    if spec.jitter > 0:
        volumes *= rng.uniform(1.0 - spec.jitter, 1.0 + spec.jitter, size=spec.count)
    prices = spec.price + spec.drift * seconds

    if spec.kind is SynthKind.SPIKE:
        spike_index = spec.count - 1 if spec.spike_index is None else spec.spike_index
        volumes[spike_index] = spec.spike_volume
    elif spec.kind is SynthKind.STEP_PRICE:
        step_index = spec.count // 2 if spec.step_index is None else spec.step_index
        step_price = spec.price + 1.0 if spec.step_price is None else spec.step_price
        prices[step_index:] += step_price - spec.price
    elif spec.kind is SynthKind.SINUSOID_VOLUME:
        volumes *= 1.0 + spec.amplitude * np.sin(2.0 * np.pi * seconds / spec.period)

    return [TradeTick(int(t), float(p), float(v)) for t, p, v in zip(times, prices, volumes)]

##
# Exceptions
#

class IngestError(ExecflowException):
    """A tick file cannot be read under the configured policies."""
    pass

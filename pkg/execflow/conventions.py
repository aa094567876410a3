# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Keep track of idiosyncratic execflow conventions."""

import os

from .exceptions import ConfigError

NS_PER_SECOND = 1_000_000_000

# Defaults for the flow pipeline. Time scales are in seconds.
DEFAULT_N = 12
DEFAULT_TAU = 128.0
DEFAULT_BASIS = 'shifted_legendre'
DEFAULT_ENTER_THRESHOLD = 0.8
DEFAULT_EXIT_THRESHOLD = 0.8
DEFAULT_NO_INFO_TOLERANCE = 0.05
DEFAULT_PRICE_POWER_ORDER = 14
DEFAULT_PRICE_LEVELS = 7

# Warmup: total elapsed time in units of tau and ticks per basis function.
WARMUP_TAUS = 3.0
WARMUP_TICKS_PER_BASIS = 4

# The zero-based column order of the canonical tick file:
# ticker, time, price, shares.
DEFAULT_COLUMNS = '0:1:2:3'

THREADS_ENV_VAR = 'EXECFLOW_THREADS'

FLOW_COLUMNS = (
    't_ns', 'last_price', 'I0', 'lambda_min', 'lambda_max', 'P_maxI', 'T_maxI',
    'proj_min', 'proj_max', 'dir_dpi', 'dir_pdi', 'no_info', 'trigger',
)

LEDGER_COLUMNS = ('t_ns', 'dS', 'fill_price', 'S_after', 'pnl_after')

LEVEL_COLUMNS = ('level', 'price', 'weight')

COVERAGE_COLUMNS = ('index', 'eigenvalue', 'share', 'cumulative_share')

COMMENT_PREFIX = '#'

def default_nd(n):
    """Return the default size of the auxiliary basis used for products
    of derivatives."""
    return 2 * n

def moment_length(n, nd):
    """Return the number of moments needed both for square n x n
    matrices and for the rectangular n x nd ones."""
    return max(2 * n - 1, n + nd - 1)

def parse_columns(spec):
    """Parse a "ticker:time:price:shares" column string into a tuple of
    zero-based integer indexes.

    The four indexes must be distinct non-negative integers.
    """

    fields = spec.split(':')
    if len(fields) != 4:
        raise ConfigError(f"Column map '{spec}' must have four ':' separated fields")
    try:
        cols = tuple(int(field) for field in fields)
    except ValueError:
        raise ConfigError(f"Column map '{spec}' contains a non-integer field")
    if any(col < 0 for col in cols):
        raise ConfigError(f"Column map '{spec}' contains a negative index")
    if len(set(cols)) != 4:
        raise ConfigError(f"Column map '{spec}' maps two fields to the same column")
    return cols

def format_tick_line(ticker, t_ns, price, shares):
    """Return a tick in the canonical tab separated form, newline
    included."""
    return f"{ticker}\t{int(t_ns)}\t{format_number(price)}\t{format_number(shares)}\n"

def format_number(value):
    """Shortest text that parses back to the same float. Integral values
    are written without a decimal point."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)

def per_ticker_path(path, ticker):
    """Return the output path for one ticker, "{stem}.{ticker}{suffix}"."""
    root, ext = os.path.splitext(path)
    return f"{root}.{ticker}{ext}"

def threads_from_env(default=1):
    """Return the worker thread count requested through the environment."""
    value = os.environ.get(THREADS_ENV_VAR)
    if value is None or value.strip() == '':
        return default
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR}={value!r} is not an integer")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be at least 1, found {threads}")
    return threads

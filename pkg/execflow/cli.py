# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Command line frontend to execflow.

    execflow flow --input trades.txt.gz --output flow.tsv --tickers NVDA --n=12 --tau=128
    execflow levels --input trades.txt --output levels.tsv --np 7
    execflow coverage --input features.csv --output coverage.tsv --weight w --df pnl
    execflow pnl --input trades.txt --output ledger.tsv --enter-thr 0.8 --exit-thr 0.8
    execflow synth --kind spike --count 100000 --spike-volume 1e6 --output synth.txt

Outputs are tab separated with '#' comment lines, ready for gnuplot. With
anything other than a single --tickers entry every ticker gets its own
file, named "{stem}.{ticker}{suffix}" after --output.
"""

import argparse
import dataclasses
import gzip
import logging
import os
import sys
import threading
from dataclasses import dataclass

from ._version import __version__
from .engine import FlowConfig, FlowEngine
from .ingest import (TickSource, ColumnMap, SynthSpec, SynthKind, synth_stream, write_ticks, session_datetime,
                     DEFAULT_TIMEZONE)
from .pricelevels import (quadrature_from_stream, moving_stats, level_crossing, EmptyMeasureError,
                          DegenerateMeasureError)
from .coverage import FeatureSample, CoverageMode, coverage_spectrum, coverage_share, DEFAULT_CHUNK_ROWS
from .pnl import liquidity_backtest, EventKind
from .flowengine import GramSource
from .polybasis import BasisKind
from .conventions import (DEFAULT_N, DEFAULT_TAU, DEFAULT_BASIS, DEFAULT_ENTER_THRESHOLD, DEFAULT_EXIT_THRESHOLD,
                          DEFAULT_PRICE_LEVELS, DEFAULT_PRICE_POWER_ORDER, DEFAULT_COLUMNS, FLOW_COLUMNS,
                          LEVEL_COLUMNS, COVERAGE_COLUMNS, COMMENT_PREFIX, per_ticker_path, threads_from_env,
                          format_number)
from .exceptions import ExecflowException, ConfigError

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MISSING_INPUT = 2

_LOG_LEVELS = {
    0: logging.INFO,
    1: logging.DEBUG,
}

_LOG_FORMAT = "[%(asctime)s] %(levelname)8s [%(name)s.%(funcName)s:%(lineno)d] %(message)s"

@dataclass
class RunConfig:
    """Everything a tick file subcommand needs. threads defaults to the
    EXECFLOW_THREADS environment variable, then 1."""
    input: str
    output: str
    tickers: tuple = None
    columns: str = DEFAULT_COLUMNS
    n: int = DEFAULT_N
    tau: float = DEFAULT_TAU
    n_d: int = None
    basis: str = DEFAULT_BASIS
    stride: int = 1
    enter_thr: float = DEFAULT_ENTER_THRESHOLD
    exit_thr: float = DEFAULT_EXIT_THRESHOLD
    gram_source: str = GramSource.SAMPLED.value
    moments_only: bool = False
    timing: bool = True
    session_date: str = None
    timezone: str = None
    threads: int = None

    def __post_init__(self):
        for name in ('enter_thr', 'exit_thr'):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ConfigError(f"{name} must be in (0, 1], found {value}")
        if self.tickers is not None:
            self.tickers = tuple(self.tickers)
        if self.threads is None:
            self.threads = threads_from_env()
        self.column_map = ColumnMap.parse(self.columns)
        self.flow = FlowConfig(n=self.n, tau=self.tau, n_d=self.n_d, basis=self.basis, stride=self.stride,
                               enter_thr=self.enter_thr, exit_thr=self.exit_thr, gram_source=self.gram_source,
                               moments_only=self.moments_only)

    @classmethod
    def from_args(cls, args):
        names = [item.name for item in dataclasses.fields(cls)]
        return cls(**{name: getattr(args, name) for name in names if hasattr(args, name)})

    @property
    def single_output(self):
        return self.tickers is not None and len(self.tickers) == 1

    def source(self):
        check_input(self.input)
        return TickSource(self.input, self.column_map, self.tickers)

def check_input(path):
    if not os.path.isfile(path):
        raise MissingInputError(path)

def _open_output(path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    if path.endswith('.gz'):
        return gzip.open(path, 'wt')
    return open(path, 'w')

class OutputFiles:
    """TSV outputs, one per ticker unless `single`, each opened with its
    header on first use. A file is only ever written by the thread that
    owns its ticker."""

    def __init__(self, path, columns, comments=(), single=False):
        self.path = path
        self.columns = columns
        self.comments = list(comments)
        self.single = single
        self._streams = {}
        self._lock = threading.Lock()

    def path_for(self, ticker):
        return self.path if self.single else per_ticker_path(self.path, ticker)

    def stream(self, ticker):
        stream = self._streams.get(ticker)
        if stream is None:
            with self._lock:
                if self.single and self._streams:
                    raise ConfigError(f"Ticker {ticker} found in a single ticker run")
                stream = self._streams[ticker] = _open_output(self.path_for(ticker))
            for comment in self.comments:
                stream.write(f"{COMMENT_PREFIX} {comment}\n")
            if self.columns:
                stream.write(f"{COMMENT_PREFIX} {chr(9).join(self.columns)}\n")
        return stream

    def write_row(self, ticker, fields):
        self.stream(ticker).write('\t'.join(fields) + '\n')

    def write_comment(self, ticker, text):
        self.stream(ticker).write(f"{COMMENT_PREFIX} {text}\n")

    @property
    def tickers(self):
        return sorted(self._streams)

    def close(self):
        for ticker, stream in self._streams.items():
            stream.close()
            _logger.info(f"Wrote {self.path_for(ticker)}")

def _session_window(config, ms):
    timezone = config.timezone or DEFAULT_TIMEZONE
    first = session_datetime(ms.first_time, config.session_date, timezone)
    last = session_datetime(ms.last_tick.t, config.session_date, timezone)
    return f"session {first.isoformat()} .. {last.isoformat()}"

##
# Subcommands
#

def cmd_flow(config):
    """Evaluate the flow spectrum over a tick file, one row per
    evaluation."""

    comments = [f"execflow {__version__} flow input={config.input}", config.flow.describe()]
    files = OutputFiles(config.output, FLOW_COLUMNS, comments, config.single_output)
    engine = FlowEngine(config.flow, lambda ticker, record: files.write_row(ticker, record.as_fields()),
                        threads=config.threads)
    try:
        stats = engine.run(config.source())
        for ticker, pipeline in sorted(engine.pipelines.items()):
            if ticker not in files.tickers:
                continue
            if config.session_date:
                window = _session_window(config, pipeline.ms)
                _logger.info(f"{ticker} {window}")
                files.write_comment(ticker, window)
            if config.timing:
                files.write_comment(ticker, f"ticks={stats.ticks} elapsed_s={stats.elapsed_s:.6f} "
                                            f"ticks_per_second={stats.ticks_per_second:.0f}")
    finally:
        files.close()
    return EXIT_OK

def cmd_levels(config, n_p=DEFAULT_PRICE_LEVELS):
    """Write the price levels and weights of each ticker at the end of the
    file."""

    order = max(DEFAULT_PRICE_POWER_ORDER, 2 * n_p - 1)
    flow = dataclasses.replace(config.flow, moments_only=True, price_power_order=order)
    engine = FlowEngine(flow, threads=config.threads)
    engine.run(config.source())

    comments = [f"execflow {__version__} levels input={config.input} n_p={n_p} tau={flow.tau:g}"]
    files = OutputFiles(config.output, LEVEL_COLUMNS, comments, config.single_output)
    try:
        for ticker, pipeline in sorted(engine.pipelines.items()):
            ms = pipeline.ms
            try:
                quad = quadrature_from_stream(ms, n_p)
            except (EmptyMeasureError, DegenerateMeasureError) as exc:
                _logger.warning(f"No price levels for {ticker}: {exc}")
                files.write_comment(ticker, f"no levels: {exc}")
                continue
            for level, (node, weight) in enumerate(zip(quad.nodes, quad.weights)):
                files.write_row(ticker, [str(level), format_number(node), format_number(weight)])
            mean, std = moving_stats(ms)
            last_price = ms.last_tick.price
            files.write_comment(ticker, f"last_price={format_number(last_price)} "
                                        f"position={level_crossing(quad, last_price).value} "
                                        f"mean={format_number(mean)} std={format_number(std)}")
    finally:
        files.close()
    return EXIT_OK

def cmd_coverage(input_path, output_path, features=None, weight=None, df=None, mode=CoverageMode.ONE,
                 chunk_rows=DEFAULT_CHUNK_ROWS, threads=None):
    """Write the coverage spectrum of a feature CSV, largest first."""

    check_input(input_path)
    threads = threads_from_env() if threads is None else threads
    sample = FeatureSample.from_csv(input_path, features, weight, df)
    spectrum = coverage_spectrum(sample, mode, chunk_rows, threads)

    comments = [f"execflow {__version__} coverage input={input_path} mode={spectrum.mode.value} "
                f"rows={len(sample)} features={sample.n_features}"]
    files = OutputFiles(output_path, COVERAGE_COLUMNS, comments, single=True)
    try:
        shares = coverage_share(spectrum)
        cumulative = 0.0
        for index, (eigenvalue, share) in enumerate(zip(spectrum.eigenvalues, shares)):
            cumulative += share
            files.write_row(None, [str(index), format_number(eigenvalue), format_number(share),
                                   format_number(cumulative)])
        files.write_comment(None, f"total={format_number(spectrum.total)} "
                                  f"eigenvalue_sum={format_number(spectrum.eigenvalues.sum())} "
                                  f"skipped_rows={spectrum.diagnostics['skipped_rows']}")
    finally:
        files.close()
    return EXIT_OK

def cmd_pnl(config, fee_per_share=0.0, slippage=0.0):
    """Backtest the flow triggers of every ticker and write its ledger."""

    by_ticker = {}
    for ticker, tick in config.source():
        by_ticker.setdefault(ticker, []).append(tick)

    comments = [f"execflow {__version__} pnl input={config.input} fee_per_share={fee_per_share:g} "
                f"slippage={slippage:g}", config.flow.describe()]
    files = OutputFiles(config.output, None, comments, config.single_output)
    try:
        for ticker, ticks in sorted(by_ticker.items()):
            ledger, summary = liquidity_backtest(ticks, config.flow, fee_per_share, slippage, ticker)
            stream = files.stream(ticker)
            ledger.write_tsv(stream)
            counts = ' '.join(f"{kind.value}={summary.events[kind]}" for kind in EventKind)
            files.write_comment(ticker, f"{counts} evaluations={summary.evaluations} "
                                        f"abstentions={summary.abstentions} fees={format_number(summary.fees)} "
                                        f"pnl={format_number(summary.pnl)}")
    finally:
        files.close()
    return EXIT_OK

def cmd_synth(spec, output, ticker):
    """Write a synthetic stream in the canonical tick format."""
    ticks = synth_stream(spec)
    with _open_output(output) as stream:
        write_ticks(ticks, stream, ticker)
    _logger.info(f"Wrote {len(ticks)} {spec.kind.value} ticks of {ticker} to {output}")
    return EXIT_OK

##
# Argument handling
#

def _tickers(text):
    return tuple(name for name in text.split(',') if name)

def _add_stream_arguments(parser):
    parser.add_argument('--input', required=True, help="tick file, optionally .gz")
    parser.add_argument('--output', required=True, help="output TSV path")
    parser.add_argument('--tickers', type=_tickers, help="comma separated tickers to keep")
    parser.add_argument('--cols', dest='columns', default=DEFAULT_COLUMNS,
                        help="zero-based ticker:time:price:shares columns")
    parser.add_argument('--n', type=int, default=DEFAULT_N, help="basis size")
    parser.add_argument('--tau', type=float, default=DEFAULT_TAU, help="time scale in seconds")
    parser.add_argument('--nd', dest='n_d', type=int, help="auxiliary basis size, default 2n")
    parser.add_argument('--basis', choices=[kind.value for kind in BasisKind], default=DEFAULT_BASIS)
    parser.add_argument('--stride', type=int, default=1, help="evaluate every stride ticks")
    parser.add_argument('--enter-thr', dest='enter_thr', type=float, default=DEFAULT_ENTER_THRESHOLD)
    parser.add_argument('--exit-thr', dest='exit_thr', type=float, default=DEFAULT_EXIT_THRESHOLD)
    parser.add_argument('--gram-source', dest='gram_source', choices=[source.value for source in GramSource],
                        default=GramSource.SAMPLED.value)

def _run_flow(args):
    return cmd_flow(RunConfig.from_args(args))

def _run_levels(args):
    return cmd_levels(RunConfig.from_args(args), args.n_p)

def _run_coverage(args):
    features = _tickers(args.features) if args.features else None
    return cmd_coverage(args.input, args.output, features, args.weight, args.df, CoverageMode(args.mode),
                        args.chunk_rows)

def _run_pnl(args):
    return cmd_pnl(RunConfig.from_args(args), args.fee, args.slippage)

def _run_synth(args):
    spec = SynthSpec(kind=args.kind, count=args.count, dt=args.dt, volume=args.volume, price=args.price,
                     seed=args.seed, jitter=args.jitter, drift=args.drift, spike_index=args.spike_index,
                     spike_volume=args.spike_volume, step_index=args.step_index, step_price=args.step_price,
                     period=args.period, amplitude=args.amplitude)
    return cmd_synth(spec, args.output, args.ticker)

def build_parser():
    parser = argparse.ArgumentParser(prog='execflow', description=__doc__.split('\n')[0])
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="logging verbosity")
    subparsers = parser.add_subparsers(dest='subcommand', required=True)

    flow = subparsers.add_parser('flow', help="flow spectrum time series")
    _add_stream_arguments(flow)
    flow.add_argument('--moments-only', dest='moments_only', action='store_true',
                      help="accumulate moments without evaluating, for throughput runs")
    flow.add_argument('--no-timing', dest='timing', action='store_false',
                      help="omit the throughput comment for reproducible outputs")
    flow.add_argument('--session-date', dest='session_date', help="trading date, echoes the session window")
    flow.add_argument('--timezone', help="exchange time zone of the session date")
    flow.set_defaults(command=_run_flow)

    levels = subparsers.add_parser('levels', help="price levels of the traded volume")
    _add_stream_arguments(levels)
    levels.add_argument('--np', dest='n_p', type=int, default=DEFAULT_PRICE_LEVELS, help="number of levels")
    levels.set_defaults(command=_run_levels)

    coverage = subparsers.add_parser('coverage', help="Christoffel coverage spectrum of a feature CSV")
    coverage.add_argument('--input', required=True, help="CSV file with a header row")
    coverage.add_argument('--output', required=True)
    coverage.add_argument('--features', help="comma separated feature columns, default all others")
    coverage.add_argument('--weight', help="weight column")
    coverage.add_argument('--df', help="column of changes to attribute")
    coverage.add_argument('--mode', choices=[mode.value for mode in CoverageMode], default=CoverageMode.ONE.value)
    coverage.add_argument('--chunk-rows', dest='chunk_rows', type=int, default=DEFAULT_CHUNK_ROWS)
    coverage.set_defaults(command=_run_coverage)

    pnl = subparsers.add_parser('pnl', help="backtest the flow triggers")
    _add_stream_arguments(pnl)
    pnl.add_argument('--fee', type=float, default=0.0, help="fee per share")
    pnl.add_argument('--slippage', type=float, default=0.0, help="price concession per fill")
    pnl.set_defaults(command=_run_pnl)

    synth = subparsers.add_parser('synth', help="write a synthetic tick stream")
    synth.add_argument('--output', required=True)
    synth.add_argument('--ticker', default='SYN')
    synth.add_argument('--kind', choices=[kind.value for kind in SynthKind], default=SynthKind.CONSTANT.value)
    synth.add_argument('--count', type=int, default=10_000)
    synth.add_argument('--dt', type=float, default=1.0, help="seconds between ticks")
    synth.add_argument('--volume', type=float, default=5.0, help="shares per tick")
    synth.add_argument('--price', type=float, default=100.0)
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--jitter', type=float, default=0.0, help="relative volume jitter")
    synth.add_argument('--drift', type=float, default=0.0, help="price drift per second")
    synth.add_argument('--spike-index', dest='spike_index', type=int)
    synth.add_argument('--spike-volume', dest='spike_volume', type=float, default=0.0)
    synth.add_argument('--step-index', dest='step_index', type=int)
    synth.add_argument('--step-price', dest='step_price', type=float)
    synth.add_argument('--period', type=float, default=60.0, help="sinusoid period in seconds")
    synth.add_argument('--amplitude', type=float, default=0.5)
    synth.set_defaults(command=_run_synth)

    return parser

def main(argv=None):
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=_LOG_LEVELS.get(args.verbose, logging.DEBUG),
        format=_LOG_FORMAT,
        datefmt="%H:%M:%S",
        stream=sys.stdout
    )

    try:
        return args.command(args)
    except MissingInputError:
        return EXIT_MISSING_INPUT
    except ExecflowException as exc:
        _logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_FAILURE

##
# Exceptions
#

class MissingInputError(ExecflowException):
    """An input file does not exist."""
    def __init__(self, path, log_level=logging.ERROR):
        self.path = path
        message = f"Input file {path} does not exist"
        _logger.log(log_level, message)
        super().__init__(message)

if __name__ == '__main__':
    sys.exit(main())

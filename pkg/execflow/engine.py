# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Execflow streaming engine.

The engine reads a merged stream of (ticker, tick) pairs and feeds one
TickerPipeline per ticker. A pipeline owns the MomentSet of its ticker,
evaluates the flow spectrum every `stride` ticks and hands the resulting
FlowRecord to its sink.

With more than one thread each worker owns a bounded queue and every
ticker is pinned to one worker on first appearance, so the ticks of a
ticker are processed in order by a single thread and no MomentSet is ever
shared.
"""

import enum
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from queue import Queue, Full

from .polybasis import BasisSpec, BasisKind
from .momentstream import MomentSet, DEFAULT_FAMILIES
from .flowengine import (analyze, impact_from_future, trigger_state, GramSource, TriggerState,
                         WarmupError)
from .futuredir import directional
from .engine_queue import TickQueueItem, EndOfStreamQueueItem
from .conventions import (DEFAULT_N, DEFAULT_TAU, DEFAULT_BASIS, DEFAULT_ENTER_THRESHOLD,
                          DEFAULT_EXIT_THRESHOLD, DEFAULT_NO_INFO_TOLERANCE, DEFAULT_PRICE_POWER_ORDER,
                          FLOW_COLUMNS, default_nd, moment_length, format_number)
from .exceptions import ExecflowException, ConfigError

_logger = logging.getLogger(__name__)

# Seconds between checks on a worker while its queue is full.
_PUT_TIMEOUT_S = 0.1

DEFAULT_QUEUE_SIZE = 4096

@dataclass
class FlowConfig:
    """Parameters of a flow pipeline. n_d defaults to 2n."""
    n: int = DEFAULT_N
    tau: float = DEFAULT_TAU
    n_d: int = None
    basis: BasisKind = DEFAULT_BASIS
    stride: int = 1
    enter_thr: float = DEFAULT_ENTER_THRESHOLD
    exit_thr: float = DEFAULT_EXIT_THRESHOLD
    no_info_tol: float = DEFAULT_NO_INFO_TOLERANCE
    gram_source: GramSource = GramSource.SAMPLED
    moments_only: bool = False
    price_power_order: int = DEFAULT_PRICE_POWER_ORDER

    def __post_init__(self):
        self.n = int(self.n)
        self.n_d = default_nd(self.n) if self.n_d is None else int(self.n_d)
        self.tau = float(self.tau)
        self.stride = int(self.stride)
        try:
            self.basis = BasisKind(self.basis)
            self.gram_source = GramSource(self.gram_source)
        except ValueError as exc:
            raise ConfigError(str(exc))
        if self.n < 2:
            raise ConfigError(f"n must be at least 2, found {self.n}")
        if self.n_d < self.n:
            raise ConfigError(f"n_d must be at least n = {self.n}, found {self.n_d}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, found {self.tau}")
        if self.stride < 1:
            raise ConfigError(f"stride must be at least 1, found {self.stride}")

    def basis_spec(self):
        return BasisSpec(self.basis, moment_length(self.n, self.n_d), self.tau)

    def describe(self):
        """Return "name=value" pairs for a header comment."""
        parts = []
        for item in fields(self):
            value = getattr(self, item.name)
            parts.append(f"{item.name}={value.value if isinstance(value, enum.Enum) else value}")
        return ' '.join(parts)

@dataclass
class FlowRecord:
    """One evaluation of a pipeline, one output row."""
    t_ns: int
    last_price: float
    I0: float
    lambda_min: float
    lambda_max: float
    P_maxI: float
    T_maxI: float
    proj_min: float
    proj_max: float
    dir_dpi: float
    dir_pdi: float
    no_info: bool
    trigger: TriggerState

    def as_fields(self):
        """Return the row as text fields in output column order."""
        res = []
        for name in FLOW_COLUMNS:
            value = getattr(self, name)
            if isinstance(value, TriggerState):
                res.append(value.value)
            elif isinstance(value, bool):
                res.append('1' if value else '0')
            elif name == 't_ns':
                res.append(str(int(value)))
            else:
                res.append(format_number(value))
        return res

def evaluate(ms, config):
    """Return the FlowRecord and FlowSolution of a snapshot."""
    fs = analyze(ms, config.n, gram_source=config.gram_source)
    reading = directional(ms, fs, config.n, config.n_d)
    impact = impact_from_future(fs, config.no_info_tol)
    record = FlowRecord(
        t_ns=fs.t_ns,
        last_price=fs.last_price,
        I0=fs.I0,
        lambda_min=fs.lambda_min,
        lambda_max=fs.lambda_max,
        P_maxI=fs.P_maxI,
        T_maxI=fs.T_maxI,
        proj_min=fs.proj_min,
        proj_max=fs.proj_max,
        dir_dpi=reading.dir_dpi,
        dir_pdi=reading.dir_pdi,
        no_info=impact.no_info,
        trigger=trigger_state(fs, config.enter_thr, config.exit_thr),
    )
    return record, fs

@dataclass
class PipelineStats:
    ticks: int = 0
    evaluations: int = 0
    warmup_skips: int = 0

class TickerPipeline:
    """Moments and periodic evaluation of a single ticker.

    Parameters
    ----------
    ticker: str
    config: ``FlowConfig``
    sink: callable, optional
        Called as sink(ticker, record) for every evaluation.
    """

    def __init__(self, ticker, config, sink=None):
        self.ticker = ticker
        self.config = config
        self.sink = sink
        self.ms = MomentSet(config.basis_spec(), DEFAULT_FAMILIES, config.price_power_order)
        self.stats = PipelineStats()

    def on_tick(self, tick):
        """Add a tick and evaluate if due. Returns the FlowRecord or None."""
        self.ms.on_tick(tick)
        self.stats.ticks += 1
        if self.config.moments_only or self.stats.ticks % self.config.stride:
            return None
        try:
            record, _ = evaluate(self.ms, self.config)
        except WarmupError:
            self.stats.warmup_skips += 1
            return None
        self.stats.evaluations += 1
        if self.sink is not None:
            self.sink(self.ticker, record)
        return record

@dataclass
class EngineStats:
    ticks: int = 0
    tickers: int = 0
    evaluations: int = 0
    warmup_skips: int = 0
    elapsed_s: float = 0.0
    per_ticker: dict = field(default_factory=dict)

    @property
    def ticks_per_second(self):
        return self.ticks / self.elapsed_s if self.elapsed_s > 0 else float('inf')

class FlowEngine:
    """Run TickerPipelines over a merged tick stream.

    Parameters
    ----------
    config: ``FlowConfig``
    sink: callable, optional
        Receives (ticker, record) for every evaluation. With several
        threads it is called from the worker owning the ticker.
    threads: int
        Number of worker threads; 1 processes ticks inline.
    queue_size: int
        Capacity of each worker queue.
    """

    def __init__(self, config, sink=None, threads=1, queue_size=DEFAULT_QUEUE_SIZE):
        if threads < 1:
            raise ConfigError(f"threads must be at least 1, found {threads}")
        self.config = config
        self.sink = sink
        self.threads = int(threads)
        self.queue_size = int(queue_size)
        self._pipelines = {}
        self._lock = threading.Lock()

    @property
    def pipelines(self):
        return dict(self._pipelines)

    def _pipeline(self, ticker):
        pipeline = self._pipelines.get(ticker)
        if pipeline is None:
            with self._lock:
                pipeline = self._pipelines[ticker] = TickerPipeline(ticker, self.config, self.sink)
            _logger.debug(f"New pipeline for {ticker}")
        return pipeline

    def run(self, stream):
        """Process every (ticker, tick) of stream and return EngineStats."""
        start = time.perf_counter()
        if self.threads == 1:
            for ticker, tick in stream:
                self._pipeline(ticker).on_tick(tick)
        else:
            self._run_threaded(stream)
        return self._collect(time.perf_counter() - start)

    def _run_threaded(self, stream):
        queues = [Queue(maxsize=self.queue_size) for _ in range(self.threads)]
        assignment = {}
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            futures = [executor.submit(self._worker, queue) for queue in queues]
            try:
                for ticker, tick in stream:
                    worker = assignment.get(ticker)
                    if worker is None:
                        worker = assignment[ticker] = len(assignment) % self.threads
                    self._put(queues[worker], futures[worker], TickQueueItem(ticker, tick))
            finally:
                for queue, future in zip(queues, futures):
                    if not future.done():
                        self._put(queue, future, EndOfStreamQueueItem())
            for future in futures:
                exc = future.exception()
                if exc is not None:
                    raise FlowEngineError(f"Worker failed: {exc}") from exc

    def _put(self, queue, future, item):
        """Put an item on a worker queue without blocking forever on a
        worker that has died."""
        while True:
            try:
                queue.put(item, timeout=_PUT_TIMEOUT_S)
                return
            except Full:
                if future.done():
                    exc = future.exception()
                    raise FlowEngineError(f"Worker stopped with a full queue: {exc}") from exc

    def _worker(self, queue):
        while True:
            item = queue.get()
            if self._process_event(item):
                return

    def _process_event(self, item):
        """Process the given QueueItem according to its type. Returns True
        when the worker should stop."""
        method_name = f'_process_{type(item).__name__}'
        return getattr(self, method_name)(item)

    def _process_TickQueueItem(self, item):
        self._pipeline(item.payload.ticker).on_tick(item.payload.tick)
        return False

    def _process_EndOfStreamQueueItem(self, _item):
        return True

    def _collect(self, elapsed_s):
        stats = EngineStats(elapsed_s=elapsed_s)
        for ticker, pipeline in sorted(self._pipelines.items()):
            stats.per_ticker[ticker] = pipeline.stats
            stats.ticks += pipeline.stats.ticks
            stats.evaluations += pipeline.stats.evaluations
            stats.warmup_skips += pipeline.stats.warmup_skips
        stats.tickers = len(self._pipelines)
        _logger.info(f"Processed {stats.ticks} ticks of {stats.tickers} tickers in {elapsed_s:.3f} s "
                     f"({stats.ticks_per_second:.0f} ticks/s), {stats.evaluations} evaluations")
        return stats

##
# Exceptions
#

class FlowEngineError(ExecflowException):
    """An error at the engine layer."""
    def __init__(self, message, log_level=logging.ERROR):
        _logger.log(log_level, f"FlowEngineError: {message}")
        super().__init__(message)

#! /usr/bin/env python
# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Run the flow engine over a synthetic stream with a volume spike and
print the flow spectrum around it."""
import argparse
import logging
import sys

from execflow.engine import FlowConfig, FlowEngine
from execflow.ingest import SynthSpec, synth_stream

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument('-c', '--count', type=int, help="number of ticks", default=4000)
parser.add_argument('-s', '--spike', type=int, help="tick index of the spike", default=3000)
parser.add_argument('--spike-volume', type=float, help="shares traded in the spike", default=1e6)
parser.add_argument('--n', type=int, help="basis size", default=12)
parser.add_argument('--tau', type=float, help="time scale in seconds", default=128.0)
parser.add_argument('--stride', type=int, help="evaluate every stride ticks", default=100)
parser.add_argument('-v', '--verbose', action='count', help="logging verbosity")
args = parser.parse_args()

log_levels = {
    0: logging.INFO,
    1: logging.DEBUG
}

logging.basicConfig(
    level=log_levels[args.verbose] if args.verbose in log_levels else logging.INFO,
    format="[%(asctime)s] %(levelname)8s [%(name)s.%(funcName)s:%(lineno)d] %(message)s",
    datefmt="%H:%M:%S",
    stream=sys.stdout
)

log = logging.getLogger(__name__)

ticks = synth_stream(SynthSpec(kind='spike', count=args.count, jitter=0.2, spike_index=args.spike,
                               spike_volume=args.spike_volume))
spike_time = ticks[args.spike].t

def on_record(ticker, record):
    seconds = (record.t_ns - spike_time) / 1e9
    log.info(f"{ticker} t={seconds:+8.1f}s I0={record.I0:10.3f} lambda=[{record.lambda_min:.3f}, "
             f"{record.lambda_max:.3f}] proj_max={record.proj_max:.3f} T_maxI={record.T_maxI:+.3f} "
             f"{record.trigger.value}")

config = FlowConfig(n=args.n, tau=args.tau, stride=args.stride)
engine = FlowEngine(config, on_record)
engine.run(('SYN', tick) for tick in ticks)

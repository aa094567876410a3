#! /usr/bin/env python
# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Show the price levels of a random walk next to its moving average
and deviation."""
import argparse

import numpy as np

from execflow.engine import FlowConfig, TickerPipeline
from execflow.momentstream import TradeTick
from execflow.pricelevels import quadrature_from_stream, moving_stats, level_crossing, PriceWeighting

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument('-c', '--count', type=int, help="number of ticks", default=5000)
parser.add_argument('--np', dest='n_p', type=int, help="number of price levels", default=7)
parser.add_argument('--tau', type=float, help="time scale in seconds", default=600.0)
parser.add_argument('--seed', type=int, default=0)
args = parser.parse_args()

rng = np.random.default_rng(args.seed)
prices = 50.0 + np.cumsum(0.01 * rng.choice([-1, 0, 1], size=args.count))
shares = rng.integers(1, 20, size=args.count) * 100

pipeline = TickerPipeline('WALK', FlowConfig(tau=args.tau, moments_only=True))
for i, (price, volume) in enumerate(zip(prices, shares)):
    pipeline.on_tick(TradeTick(34_200_000_000_000 + i * 250_000_000, float(price), float(volume)))

quad = quadrature_from_stream(pipeline.ms, args.n_p)
for level, (node, weight) in enumerate(zip(quad.nodes, quad.weights)):
    print(f"level {level}: {node:10.4f}  {weight:14.1f} shares")

for weighting in PriceWeighting:
    mean, std = moving_stats(pipeline.ms, weighting)
    print(f"{weighting.value:>6} weighted average {mean:.4f} +- {std:.4f}")
print(f"last price {prices[-1]:.4f} is {level_crossing(quad, prices[-1]).value}")

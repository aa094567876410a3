# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

""" Execution flow analytics for trade tick streams """
# flake8: noqa

from ._version import __version__

from . import polybasis, momentstream, spectral

# The operations most callers need, in one place.
from .polybasis import BasisSpec, BasisKind
from .momentstream import MomentSet, TradeTick, Integrand, MeasureKind
from .flowengine import analyze, trigger_state, impact_from_future, GramSource, TriggerState
from .futuredir import directional, density_matrix_since
from .pricelevels import price_quadrature, quadrature_from_stream, level_crossing
from .localized_opt import maximize_I_localized, maximize_IK, localized_observables
from .coverage import FeatureSample, coverage_spectrum
from .pnl import Ledger, liquidity_backtest
from .ingest import TickSource, SynthSpec, synth_stream

from .engine import FlowConfig, FlowEngine, TickerPipeline

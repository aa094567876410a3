# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Unit tests for the streaming moment accumulator."""

import math
import time
import unittest

import numpy as np

from .polybasis import BasisSpec, BasisKind
from .momentstream import (MomentSet, TradeTick, Integrand, MeasureKind, ChronologyError,
                           DEFAULT_FAMILIES, recompute_oracle, price_power_moments)
from .conventions import NS_PER_SECOND, moment_length
from .exceptions import ConfigError

ONE, PRICE, TIME = Integrand.ONE, Integrand.PRICE, Integrand.TIME
DT, DP, DV = MeasureKind.DT, MeasureKind.DP, MeasureKind.DV

##
# Support functions
#

def random_stream(rng, count, mean_gap_s=0.5, start_ns=34_200 * NS_PER_SECOND):
    """Return a random walk tick stream with occasional duplicate
    timestamps."""
    gaps = rng.exponential(mean_gap_s, size=count) * NS_PER_SECOND
    gaps[rng.random(count) < 0.1] = 0
    times = start_ns + np.cumsum(gaps.astype(np.int64))
    prices = np.round(100.0 + np.cumsum(rng.normal(scale=0.02, size=count)), 2)
    shares = rng.integers(1, 500, size=count)
    return [TradeTick(int(t), float(p), float(v)) for t, p, v in zip(times, prices, shares)]

def uniform_stream(count, dt_s=1.0, shares=5.0, price=100.0, start_ns=0):
    step = int(dt_s * NS_PER_SECOND)
    return [TradeTick(start_ns + i * step, price, shares) for i in range(count)]

def feed(ms, ticks):
    for tick in ticks:
        ms.on_tick(tick)
    return ms

class MomentTester(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(20210611)
        self.n = 12
        self.tau = 128.0
        self.basis = BasisSpec(BasisKind.SHIFTED_LEGENDRE, moment_length(self.n, 2 * self.n), self.tau)

    def assertFamiliesClose(self, actual, expected, rtol):
        for family in DEFAULT_FAMILIES:
            exp = expected[family]
            scale = max(np.abs(exp).max(), 1e-300)
            np.testing.assert_allclose(actual[family], exp, rtol=0, atol=rtol * scale,
                                       err_msg=f"family {family}")

class ConstructionTester(MomentTester):

    def test_time_family_needs_base(self):
        with self.assertRaises(ConfigError):
            MomentSet(self.basis, families=[(TIME, DV)])

    def test_duplicate_family(self):
        with self.assertRaises(ConfigError):
            MomentSet(self.basis, families=[(ONE, DV), (ONE, DV)])

    def test_unknown_family(self):
        ms = MomentSet(self.basis, families=[(ONE, DV)])
        with self.assertRaises(KeyError):
            ms.moments(PRICE, DT)

class AdvanceTester(MomentTester):

    def test_zero_delta(self):
        ms = feed(MomentSet(self.basis), random_stream(self.rng, 50))
        before = ms.block
        ms.advance(ms.reference_time)
        np.testing.assert_array_equal(ms.block, before)

    def test_monomial_decay(self):
        basis = BasisSpec(BasisKind.MONOMIAL, 6, 2.0)
        ms = feed(MomentSet(basis, families=[(ONE, DV)]), random_stream(self.rng, 20))
        before = ms[ONE, DV]
        delta_s = 0.75
        ms.advance(ms.reference_time + int(delta_s * NS_PER_SECOND))
        factors = np.exp(-(np.arange(6) + 1) * delta_s / 2.0)
        np.testing.assert_allclose(ms[ONE, DV], before * factors, rtol=1e-13)

    def test_semigroup(self):
        ms = feed(MomentSet(self.basis), random_stream(self.rng, 200))
        start = ms.reference_time
        two_steps = ms.copy().advance(start + 2 * NS_PER_SECOND).flush().advance(start + 5 * NS_PER_SECOND)
        one_step = ms.copy().advance(start + 5 * NS_PER_SECOND)
        self.assertFamiliesClose(two_steps, one_step, 1e-12)

    def test_backwards(self):
        ms = feed(MomentSet(self.basis), random_stream(self.rng, 5))
        with self.assertRaises(ChronologyError):
            ms.advance(ms.reference_time - 1)

    def test_long_silence(self):
        ms = feed(MomentSet(self.basis), random_stream(self.rng, 500))
        before = ms.copy()
        ms.advance(ms.reference_time + int(20 * self.tau * NS_PER_SECOND))
        for family in DEFAULT_FAMILIES:
            scale = np.abs(before[family]).max()
            # The TIME integrand grows with the gap, (t - t_now)/tau ~ -20.
            bound = 1e-6 if family[0] is TIME else 1e-8
            self.assertLess(np.abs(ms[family]).max(), bound * scale, f"family {family}")

class TickTester(MomentTester):

    def test_first_tick(self):
        ms = MomentSet(self.basis)
        ms.on_tick(TradeTick(1000, 50.0, 7.0))
        for family in DEFAULT_FAMILIES:
            if family[1] is not DV or family[0] is TIME:
                np.testing.assert_array_equal(ms[family], np.zeros(self.basis.size))
        np.testing.assert_allclose(ms[ONE, DV], 7.0 * np.ones(self.basis.size))
        np.testing.assert_allclose(ms[PRICE, DV], 350.0 * np.ones(self.basis.size))

    def test_uniform_ratio(self):
        ms = feed(MomentSet(self.basis), uniform_stream(int(10 * self.tau) + 1))
        ratio = ms[ONE, DV][0] / ms[ONE, DT][0]
        self.assertAlmostEqual(ratio, 5.0, delta=0.05)

    def test_constant_price(self):
        ticks = [TradeTick(t.t, 42.0, t.shares) for t in random_stream(self.rng, 300)]
        ms = feed(MomentSet(self.basis), ticks)
        np.testing.assert_array_equal(ms[ONE, DP], np.zeros(self.basis.size))

    def test_duplicate_timestamps(self):
        ms = MomentSet(self.basis)
        ms.on_tick(TradeTick(0, 10.0, 1.0))
        ms.on_tick(TradeTick(NS_PER_SECOND, 10.0, 1.0))
        dt_before = ms[ONE, DT]
        ms.on_tick(TradeTick(NS_PER_SECOND, 11.0, 2.0))
        np.testing.assert_array_equal(ms[ONE, DT], dt_before)
        np.testing.assert_allclose(ms[ONE, DP], np.ones(self.basis.size))

    def test_rejects_decreasing_time(self):
        ms = MomentSet(self.basis)
        ms.on_tick(TradeTick(10, 10.0, 1.0))
        with self.assertRaises(ChronologyError):
            ms.on_tick(TradeTick(9, 10.0, 1.0))

    def test_counters(self):
        ms = feed(MomentSet(self.basis), uniform_stream(11, start_ns=500))
        self.assertEqual(ms.tick_count, 11)
        self.assertEqual(ms.first_time, 500)
        self.assertEqual(ms.elapsed_ns, 10 * NS_PER_SECOND)

    def test_nonnegative_mass(self):
        ms = MomentSet(self.basis)
        for tick in random_stream(self.rng, 2000):
            ms.on_tick(tick)
            self.assertGreaterEqual(ms[ONE, DT][0], 0.0)
            self.assertGreaterEqual(ms[ONE, DV][0], 0.0)

class OracleTester(MomentTester):

    def test_empty(self):
        ms = recompute_oracle([], self.basis)
        np.testing.assert_array_equal(ms.block, np.zeros((len(DEFAULT_FAMILIES), self.basis.size)))

    def test_one_tick(self):
        tick = TradeTick(123, 20.0, 3.0)
        streamed = MomentSet(self.basis).on_tick(tick)
        oracle = recompute_oracle([tick], self.basis)
        np.testing.assert_allclose(oracle.block, streamed.block, rtol=1e-15)

    def test_short_history(self):
        ticks = random_stream(self.rng, 10)
        streamed = feed(MomentSet(self.basis), ticks)
        self.assertFamiliesClose(streamed, recompute_oracle(ticks, self.basis), 1e-10)

    def test_long_history(self):
        ticks = random_stream(self.rng, 20000)
        streamed = feed(MomentSet(self.basis), ticks)
        oracle = recompute_oracle(ticks, self.basis)
        self.assertFamiliesClose(streamed, oracle, 1e-8)
        # Even powers are sums of non-negative terms, so a relative check is fair.
        np.testing.assert_allclose(streamed.price_powers.relative_powers()[::2],
                                   oracle.price_powers.relative_powers()[::2], rtol=1e-8)

    def test_snapshot_time(self):
        ticks = random_stream(self.rng, 300)
        later = ticks[-1].t + 7 * NS_PER_SECOND
        streamed = feed(MomentSet(self.basis), ticks).advance(later)
        self.assertFamiliesClose(streamed, recompute_oracle(ticks, self.basis, at_time=later), 1e-10)

    def test_monomial_basis(self):
        basis = BasisSpec(BasisKind.MONOMIAL, 5, 30.0)
        ticks = random_stream(self.rng, 400)
        streamed = feed(MomentSet(basis), ticks)
        self.assertFamiliesClose(streamed, recompute_oracle(ticks, basis), 1e-10)

class PricePowerTester(MomentTester):

    def test_single_price(self):
        ticks = [TradeTick(t.t, 10.0, t.shares) for t in random_stream(self.rng, 50)]
        ms = feed(MomentSet(self.basis), ticks)
        powers = price_power_moments(ms)
        np.testing.assert_allclose(powers, 10.0 ** np.arange(15) * powers[0], rtol=1e-13)

    def test_two_prices(self):
        basis = BasisSpec(BasisKind.SHIFTED_LEGENDRE, 3, 1e6)
        ms = MomentSet(basis)
        ms.on_tick(TradeTick(0, 10.0, 30.0))
        ms.on_tick(TradeTick(NS_PER_SECOND, 20.0, 10.0))
        powers = price_power_moments(ms, 2)
        self.assertAlmostEqual(powers[1] / powers[0], 12.5, places=4)
        self.assertAlmostEqual(powers[2] / powers[0], 175.0, places=3)

    def test_zeroth_power(self):
        ms = feed(MomentSet(self.basis), random_stream(self.rng, 1000))
        self.assertAlmostEqual(price_power_moments(ms, 0)[0] / ms[ONE, DV][0], 1.0, places=12)

    def test_price_range(self):
        ticks = random_stream(self.rng, 100)
        ms = feed(MomentSet(self.basis), ticks)
        low, high = ms.price_powers.price_range
        self.assertEqual(low, min(t.price for t in ticks))
        self.assertEqual(high, max(t.price for t in ticks))

    def test_order_bound(self):
        ms = feed(MomentSet(self.basis, price_power_order=4), random_stream(self.rng, 10))
        with self.assertRaises(ConfigError):
            price_power_moments(ms, 5)

    def test_disabled(self):
        ms = MomentSet(self.basis, price_power_order=None)
        with self.assertRaises(ConfigError):
            price_power_moments(ms)

    def test_weighted_sum(self):
        ticks = random_stream(self.rng, 200)
        ms = feed(MomentSet(self.basis), ticks)
        final = ticks[-1].t
        omega = np.array([math.exp((t.t - final) / NS_PER_SECOND / self.tau) for t in ticks])
        prices = np.array([t.price for t in ticks])
        shares = np.array([t.shares for t in ticks])
        expected = [(omega * shares * prices ** k).sum() for k in range(4)]
        np.testing.assert_allclose(price_power_moments(ms, 3), expected, rtol=1e-10)

class BufferTester(MomentTester):

    def test_pending_until_read(self):
        ms = feed(MomentSet(self.basis), random_stream(self.rng, 30))
        self.assertEqual(ms.pending_count, 30)
        ms[ONE, DV]
        self.assertEqual(ms.pending_count, 0)
        self.assertEqual(ms.tick_count, 30)

    def test_flush_size(self):
        ms = feed(MomentSet(self.basis, flush_ticks=8), random_stream(self.rng, 20))
        self.assertEqual(ms.pending_count, 4)
        with self.assertRaises(ConfigError):
            MomentSet(self.basis, flush_ticks=0)

    def test_flush_size_invariance(self):
        ticks = random_stream(self.rng, 3000)
        eager = feed(MomentSet(self.basis, flush_ticks=1), ticks)
        lazy = feed(MomentSet(self.basis, flush_ticks=500), ticks)
        self.assertFamiliesClose(lazy, eager, 1e-10)
        np.testing.assert_allclose(lazy.price_powers.relative_powers()[::2],
                                   eager.price_powers.relative_powers()[::2], rtol=1e-10)

    def test_copy_is_independent(self):
        ticks = random_stream(self.rng, 100)
        ms = feed(MomentSet(self.basis), ticks[:60])
        snapshot = ms.copy()
        before = snapshot.block
        feed(ms, ticks[60:])
        np.testing.assert_array_equal(snapshot.block, before)
        self.assertEqual(snapshot.tick_count, 60)

    def test_random_gap_throughput(self):
        basis = BasisSpec(BasisKind.SHIFTED_LEGENDRE, moment_length(12, 12), self.tau)
        ticks = random_stream(self.rng, 100_000, mean_gap_s=0.05)
        start = time.perf_counter()
        streamed = feed(MomentSet(basis), ticks)
        streamed.flush()
        elapsed = time.perf_counter() - start
        self.assertLess(elapsed, 5.0, f"{len(ticks) / elapsed:.0f} ticks/s")
        self.assertFamiliesClose(streamed, recompute_oracle(ticks, basis), 1e-8)

# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Unit tests for flow maximization over localized states."""

import math
import unittest

import numpy as np

from .polybasis import BasisSpec, BasisKind
from .momentstream import Integrand, MeasureKind, recompute_oracle
from .spectral import build_matrix, localized_state, rayleigh
from .flowengine import analyze, flow_matrices
from .ingest import SynthSpec, synth_stream
from .localized_opt import (rn_interpolate, maximize_I_localized, maximize_IK, localized_observables,
                            ScanMethod, Objective, LEFT_END)
from .conventions import moment_length

VOLUME = (Integrand.ONE, MeasureKind.DV)

##
# Support functions
#

def snapshot(ticks, n=12, tau=128.0):
    return recompute_oracle(ticks, BasisSpec(BasisKind.SHIFTED_LEGENDRE, moment_length(n, 2 * n), tau))

def measure_moments(rng, basis, count):
    """Moments of a random positive discrete measure on (0, 1)."""
    x = rng.uniform(0.0, 1.0, size=count)
    w = rng.uniform(0.1, 1.0, size=count)
    return w @ basis.vander(x)

class InterpolateTester(unittest.TestCase):

    def setUp(self):
        self.n = 12
        self.ms = snapshot(synth_stream(SynthSpec(count=3000, volume=5.0)))
        self.A, self.gram = flow_matrices(self.ms, self.n)

    def test_constant_flow(self):
        for y in (0.05, 0.3, 0.77, 1.0):
            value = rn_interpolate(self.ms[VOLUME], self.gram, y, self.ms.basis)
            self.assertAlmostEqual(value, 5.0, delta=0.05)

    def test_matches_localized_state(self):
        psi0 = localized_state(self.ms.basis, self.gram, 1.0)
        expected = rayleigh(self.A, self.gram, psi0)
        value = rn_interpolate(self.ms[VOLUME], self.gram, 1.0, self.ms.basis)
        self.assertAlmostEqual(value / expected, 1.0, places=10)

    def test_single_function(self):
        moments = np.array([6.0, 0.5, 0.25])
        gram = np.array([[2.0]])
        for y in (0.1, 0.5, 1.0):
            self.assertAlmostEqual(rn_interpolate(moments, gram, y), 3.0)
        scan = maximize_IK(moments, gram)
        self.assertEqual(scan.y_star, 1.0)

    def test_flat_returns_now(self):
        scan = maximize_I_localized(self.ms[VOLUME], self.gram, self.ms.basis)
        self.assertEqual(scan.y_star, 1.0)
        self.assertIs(scan.method, ScanMethod.ROOTS)
        self.assertAlmostEqual(scan.value, 5.0, delta=0.05)

class SpikeTester(unittest.TestCase):

    def setUp(self):
        self.n = 12
        ticks = synth_stream(SynthSpec(kind='spike', count=2065, volume=5.0, spike_index=2000, spike_volume=1e6))
        self.ms = snapshot(ticks)
        self.fs = analyze(self.ms, self.n)
        _, self.gram = flow_matrices(self.ms, self.n)

    def test_spike_is_found(self):
        scan = maximize_I_localized(self.ms[VOLUME], self.gram, self.ms.basis)
        self.assertAlmostEqual(scan.y_star, math.exp(-0.5), delta=1e-3)
        self.assertLessEqual(scan.value, self.fs.lambda_max * (1 + 1e-9))
        self.assertLess(abs(scan.value - self.fs.lambda_max) / self.fs.lambda_max, 0.15)

    def test_christoffel_damping(self):
        by_flow = maximize_I_localized(self.ms[VOLUME], self.gram, self.ms.basis)
        by_volume = maximize_IK(self.ms[VOLUME], self.gram, self.ms.basis)
        self.assertGreaterEqual(by_volume.christoffel, by_flow.christoffel * (1 - 1e-9))
        self.assertTrue(0.0 < by_volume.y_star <= 1.0)

    def test_observables(self):
        obs = localized_observables(self.ms, self.n)
        self.assertAlmostEqual(obs.T, -0.5, delta=0.05)
        self.assertAlmostEqual(obs.P, 100.0, places=6)
        self.assertAlmostEqual(obs.I / self.fs.lambda_max, 1.0, delta=1e-3)
        self.assertAlmostEqual(obs.K, obs.scan.christoffel)
        other = localized_observables(self.ms, self.n, objective=Objective.IK)
        self.assertGreaterEqual(other.K, obs.K * (1 - 1e-9))

class MethodTester(unittest.TestCase):

    def test_roots_against_grid(self):
        rng = np.random.default_rng(404)
        n = 5
        basis = BasisSpec(BasisKind.SHIFTED_LEGENDRE, 2 * n - 1, 1.0)
        for _ in range(100):
            gram = build_matrix(basis, measure_moments(rng, basis, 400), n).values
            moments = measure_moments(rng, basis, 30)
            for scan_fn in (maximize_I_localized, maximize_IK):
                by_roots = scan_fn(moments, gram, basis)
                by_grid = scan_fn(moments, gram, basis, method=ScanMethod.GRID)
                self.assertIs(by_grid.method, ScanMethod.GRID)
                self.assertTrue(0.0 < by_roots.y_star <= 1.0)
                # The grid cannot beat the exact maximum and misses it by
                # at most the curvature over half a cell.
                self.assertGreaterEqual(by_roots.value, by_grid.value * (1 - 1e-9))
                self.assertLessEqual(by_roots.value, by_grid.value * (1 + 1e-3))

    def test_subspace_bound(self):
        ticks = synth_stream(SynthSpec(kind='sinusoid_volume', count=3000, jitter=0.9, period=200.0, seed=9))
        ms = snapshot(ticks)
        fs = analyze(ms, 12)
        _, gram = flow_matrices(ms, 12)
        scan = maximize_I_localized(ms[VOLUME], gram, ms.basis)
        self.assertLessEqual(scan.value, fs.lambda_max * (1 + 1e-9))
        self.assertGreaterEqual(scan.value, fs.I0 * (1 - 1e-9))

    def test_root_near_infinite_past(self):
        # I(y) = (1 + 2 eps y)/(1 + y^2) peaks at y = (sqrt(1 + 4 eps^2) - 1)/(2 eps),
        # left of the first grid point.
        eps = 1e-4
        basis = BasisSpec(BasisKind.MONOMIAL, 3, 1.0)
        moments = np.array([1.0, eps, 0.0])
        scan = maximize_I_localized(moments, np.eye(2), basis)
        expected = (math.sqrt(1.0 + 4.0 * eps * eps) - 1.0) / (2.0 * eps)
        self.assertLess(expected, LEFT_END)
        self.assertAlmostEqual(scan.y_star / expected, 1.0, places=6)
        self.assertGreater(scan.value, 1.0)
        by_grid = maximize_I_localized(moments, np.eye(2), basis, method=ScanMethod.GRID)
        self.assertGreaterEqual(by_grid.y_star, LEFT_END)

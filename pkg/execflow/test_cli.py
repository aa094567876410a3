# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Tests of the command line frontend against temporary directories."""

import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from . import cli
from .ingest import SynthSpec, synth_stream, write_ticks
from .conventions import (FLOW_COLUMNS, LEDGER_COLUMNS, LEVEL_COLUMNS, COVERAGE_COLUMNS, THREADS_ENV_VAR,
                          NS_PER_SECOND)

##
# Support functions
#

def read_tsv(path):
    """Return (comment lines, rows) of an output file."""
    comments, rows = [], []
    with open(path) as stream:
        for line in stream:
            line = line.rstrip('\n')
            if line.startswith('#'):
                comments.append(line[1:].strip())
            else:
                rows.append(line.split('\t'))
    return comments, rows

class CliTester(unittest.TestCase):

    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmpdir.cleanup()

    def path(self, name):
        return os.path.join(self.tmpdir.name, name)

    def read(self, name):
        with open(self.path(name), 'rb') as stream:
            return stream.read()

    def synth(self, name, *args):
        code = cli.main(['synth', '--output', self.path(name), *args])
        self.assertEqual(code, cli.EXIT_OK)
        return self.path(name)

class SynthTester(CliTester):

    def test_reproducible(self):
        self.synth('a.txt', '--count', '500', '--jitter', '0.3', '--seed', '9')
        self.synth('b.txt', '--count', '500', '--jitter', '0.3', '--seed', '9')
        self.synth('c.txt', '--count', '500', '--jitter', '0.3', '--seed', '10')
        self.assertEqual(self.read('a.txt'), self.read('b.txt'))
        self.assertNotEqual(self.read('a.txt'), self.read('c.txt'))

    def test_format(self):
        self.synth('spike.txt', '--kind', 'spike', '--count', '10', '--spike-index', '4', '--spike-volume', '1e6',
                   '--ticker', 'NVDA')
        lines = self.read('spike.txt').decode().splitlines()
        self.assertEqual(len(lines), 10)
        fields = lines[4].split('\t')
        self.assertEqual(fields[0], 'NVDA')
        self.assertEqual(fields[3], '1000000')

class FlowTester(CliTester):

    def setUp(self):
        super().setUp()
        self.input = self.synth('ticks.txt', '--count', '400', '--jitter', '0.5', '--seed', '3')
        self.args = ['flow', '--input', self.input, '--tickers', 'SYN', '--n', '4', '--tau', '16', '--stride', '50']

    def test_rows(self):
        output = self.path('flow.tsv')
        self.assertEqual(cli.main(self.args + ['--output', output]), cli.EXIT_OK)
        comments, rows = read_tsv(output)
        self.assertIn('\t'.join(FLOW_COLUMNS), comments)
        self.assertTrue(any('n=4' in comment for comment in comments))
        self.assertTrue(comments[-1].startswith('ticks=400'))
        self.assertEqual(len(rows), 8)
        for row in rows:
            self.assertEqual(len(row), len(FLOW_COLUMNS))
            values = dict(zip(FLOW_COLUMNS, row))
            I0, lambda_min, lambda_max = (float(values[name]) for name in ('I0', 'lambda_min', 'lambda_max'))
            self.assertLessEqual(lambda_min, I0 * (1 + 1e-9))
            self.assertLessEqual(I0, lambda_max * (1 + 1e-9))
            self.assertIn(values['trigger'], ('ENTER_OK', 'EXIT_OK', 'NONE'))

    def test_spike_smoke(self):
        spike_index = 79_999
        ticks = self.synth('spike.txt', '--kind', 'spike', '--count', '100000', '--spike-index', str(spike_index),
                           '--spike-volume', '1e6')
        output = self.path('spike.tsv')
        code = cli.main(['flow', '--input', ticks, '--output', output, '--tickers', 'SYN', '--n=12', '--tau=128',
                         '--stride', '1000', '--no-timing'])
        self.assertEqual(code, cli.EXIT_OK)
        _, rows = read_tsv(output)
        records = [dict(zip(FLOW_COLUMNS, row)) for row in rows]
        self.assertTrue(all(len(row) == len(FLOW_COLUMNS) for row in rows))

        spike_ns = SynthSpec().start_ns + spike_index * NS_PER_SECOND
        prefix = [record for record in records if int(record['t_ns']) < spike_ns]
        near = [record for record in records if abs(int(record['t_ns']) - spike_ns) <= 2 * NS_PER_SECOND]
        self.assertGreater(len(prefix), 10)
        self.assertTrue(all(record['no_info'] == '1' for record in prefix))
        self.assertTrue(near)
        for record in near:
            self.assertGreater(float(record['proj_max']), 0.8)

    def test_reproducible(self):
        args = self.args + ['--no-timing']
        cli.main(args + ['--output', self.path('one.tsv')])
        with mock.patch.dict(os.environ, {THREADS_ENV_VAR: '2'}):
            cli.main(args + ['--output', self.path('two.tsv')])
        self.assertEqual(self.read('one.tsv'), self.read('two.tsv'))

    def test_session_window(self):
        output = self.path('flow.tsv')
        cli.main(self.args + ['--output', output, '--session-date', '2024-03-01', '--no-timing'])
        comments, _ = read_tsv(output)
        self.assertTrue(comments[-1].startswith('session 2024-03-01T09:30:00-05:00'))

    def test_per_ticker(self):
        path = self.path('two.txt')
        with open(path, 'w') as stream:
            write_ticks(synth_stream(SynthSpec(count=200, volume=2.0, price=10.0)), stream, 'AAA')
            write_ticks(synth_stream(SynthSpec(count=300, volume=7.0, price=30.0)), stream, 'BBB')
        output = self.path('out/flow.tsv')
        code = cli.main(['flow', '--input', path, '--output', output, '--n', '4', '--tau', '16', '--stride', '100'])
        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(len(read_tsv(self.path('out/flow.AAA.tsv'))[1]), 2)
        self.assertEqual(len(read_tsv(self.path('out/flow.BBB.tsv'))[1]), 3)
        self.assertFalse(os.path.exists(output))

    def test_moments_only(self):
        output = self.path('flow.tsv')
        self.assertEqual(cli.main(self.args + ['--output', output, '--moments-only']), cli.EXIT_OK)
        self.assertFalse(os.path.exists(output))

    def test_missing_input(self):
        missing = self.path('nowhere.txt')
        with self.assertLogs('execflow.cli', level='ERROR') as logs:
            code = cli.main(['flow', '--input', missing, '--output', self.path('flow.tsv')])
        self.assertEqual(code, cli.EXIT_MISSING_INPUT)
        self.assertIn(missing, '\n'.join(logs.output))

    def test_bad_config(self):
        for extra in (['--n', '1'], ['--nd', '2'], ['--enter-thr', '1.5'], ['--cols', '0:1:1:3']):
            with self.subTest(extra=extra):
                code = cli.main(self.args + ['--output', self.path('flow.tsv')] + extra)
                self.assertEqual(code, cli.EXIT_FAILURE)

    def test_default_flags(self):
        args = cli.build_parser().parse_args(['flow', '--input', 'in', '--output', 'out', '--n=12', '--tau=128'])
        config = cli.RunConfig.from_args(args)
        self.assertEqual((config.n, config.tau, config.flow.n_d), (12, 128.0, 24))

class LevelsTester(CliTester):

    def test_seven_levels(self):
        path = self.synth('drift.txt', '--count', '2000', '--drift', '0.001', '--jitter', '0.5')
        output = self.path('levels.tsv')
        code = cli.main(['levels', '--input', path, '--output', output, '--tickers', 'SYN', '--tau', '1000'])
        self.assertEqual(code, cli.EXIT_OK)
        comments, rows = read_tsv(output)
        self.assertIn('\t'.join(LEVEL_COLUMNS), comments)
        self.assertEqual(len(rows), 7)
        prices = np.array([float(row[1]) for row in rows])
        weights = np.array([float(row[2]) for row in rows])
        self.assertTrue(np.all(np.diff(prices) > 0))
        self.assertTrue(np.all((prices > 100.0) & (prices < 102.0)))
        self.assertTrue(np.all(weights > 0))
        self.assertIn('position=', comments[-1])

class CoverageTester(CliTester):

    def test_two_clusters(self):
        rng = np.random.default_rng(2)
        x = np.vstack([np.tile([1.0, 0.0], (500, 1)), np.tile([0.0, 1.0], (500, 1))])
        x += 0.01 * rng.normal(size=x.shape)
        path = self.path('features.csv')
        with open(path, 'w') as stream:
            stream.write('a,b\n')
            for a, b in x:
                stream.write(f'{float(a)!r},{float(b)!r}\n')
        output = self.path('coverage.tsv')
        self.assertEqual(cli.main(['coverage', '--input', path, '--output', output]), cli.EXIT_OK)
        comments, rows = read_tsv(output)
        self.assertIn('\t'.join(COVERAGE_COLUMNS), comments)
        self.assertEqual(len(rows), 2)
        total = sum(float(row[1]) for row in rows)
        self.assertAlmostEqual(total, 1000.0, places=6)
        self.assertAlmostEqual(float(rows[-1][3]), 1.0, places=8)
        self.assertIn('total=1000', comments[-1])

class PnlTester(CliTester):

    def test_ledger(self):
        path = self.synth('wave.txt', '--kind', 'sinusoid_volume', '--count', '1500', '--jitter', '0.5',
                          '--drift', '0.001', '--period', '90', '--amplitude', '0.9', '--seed', '4')
        output = self.path('ledger.tsv')
        code = cli.main(['pnl', '--input', path, '--output', output, '--tickers', 'SYN', '--n', '6', '--tau', '32',
                         '--stride', '25', '--fee', '0.01'])
        self.assertEqual(code, cli.EXIT_OK)
        comments, rows = read_tsv(output)
        self.assertIn('\t'.join(LEDGER_COLUMNS), comments)
        self.assertIn('pnl=', comments[-1])
        if rows:
            self.assertEqual(float(rows[-1][3]), 0.0)

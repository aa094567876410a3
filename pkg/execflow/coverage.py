# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Christoffel function coverage spectrum of a feature sample.

For rows x with weights w the Gram matrix is G = <x_j|x_k> and the
Christoffel function K(x) = 1/(x^T G^-1 x). The generalized eigenproblem

    <x_j|K|x_k> psi = lambda <x_j|x_k> psi

has eigenvalues summing to the total weight, and unlike principal
components they do not change under any invertible linear transform of
the features. Weighting each row by a change df instead attributes the
total change to the eigenstates.

The K matrix needs G first, so the sample is read twice.
"""

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg

from .spectral import OperatorMatrix, factor_spd, solve_gev, REGULARIZATION
from .exceptions import ConfigError

_logger = logging.getLogger(__name__)

DEFAULT_CHUNK_ROWS = 4096

class CoverageMode(enum.Enum):
    ONE = 'one'
    DF = 'df'

@dataclass
class FeatureSample:
    """Feature rows, their weights, and optionally a per-row change of
    the attributed quantity."""
    x: np.ndarray
    weights: np.ndarray = None
    df: np.ndarray = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        rows, n_f = self.x.shape
        self.weights = np.ones(rows) if self.weights is None else np.asarray(self.weights, dtype=float)
        if self.weights.shape != (rows,):
            raise ConfigError(f"Expected {rows} weights, found shape {self.weights.shape}")
        if np.any(self.weights < 0):
            raise ConfigError("Sample weights must be non-negative")
        if self.df is not None:
            self.df = np.asarray(self.df, dtype=float)
            if self.df.shape != (rows,):
                raise ConfigError(f"Expected {rows} df values, found shape {self.df.shape}")
        if np.count_nonzero(self.weights) < n_f:
            raise ConfigError(f"A sample of {n_f} features needs at least {n_f} weighted rows")

    @property
    def n_features(self):
        return self.x.shape[1]

    def __len__(self):
        return self.x.shape[0]

    @property
    def total_weight(self):
        return float(self.weights.sum())

    def transformed(self, matrix):
        """Return the sample with every row mapped by x -> T x."""
        return FeatureSample(self.x @ np.asarray(matrix, dtype=float).T, self.weights, self.df)

    @classmethod
    def from_csv(cls, path, features=None, weight=None, df=None):
        """Read a sample from a CSV file with a header row.

        features names the feature columns; by default every column other
        than the weight and df columns is a feature.
        """
        frame = pd.read_csv(path)
        for name in [weight, df, *(features or [])]:
            if name is not None and name not in frame.columns:
                raise ConfigError(f"{path}: no column named {name!r}")
        if features is None:
            features = [name for name in frame.columns if name not in (weight, df)]
        weights = frame[weight].to_numpy(dtype=float) if weight is not None else None
        changes = frame[df].to_numpy(dtype=float) if df is not None else None
        return cls(frame[list(features)].to_numpy(dtype=float), weights, changes)

@dataclass
class CoverageSpectrum:
    """Eigenvalues in descending order with their coefficient vectors
    (columns). total is the sum the eigenvalues must add up to."""
    eigenvalues: np.ndarray
    vectors: np.ndarray
    total: float
    mode: CoverageMode
    diagnostics: dict = field(default_factory=dict)

def fit_gram(sample):
    """Return <x_j|x_k> = sum_l w_l x_j x_k. A rank deficient result is
    flagged in its diagnostics rather than rejected."""
    values = (sample.x * sample.weights[:, None]).T @ sample.x
    eigenvalues = scipy.linalg.eigvalsh(values)
    floor = REGULARIZATION * max(np.trace(values), np.finfo(float).tiny) / len(values)
    rank = int(np.count_nonzero(eigenvalues > floor))
    diagnostics = {
        'smallest_eigenvalue': float(eigenvalues[0]),
        'rank': rank,
        'degenerate': rank < len(values),
    }
    if diagnostics['degenerate']:
        _logger.warning(f"Feature Gram matrix has rank {rank} of {len(values)}")
    return OperatorMatrix(values, 'feature gram', diagnostics)

def _chunk_k_matrix(x, lower, factor):
    """Partial K matrix of one chunk and the number of zero rows in it."""
    solved = scipy.linalg.cho_solve((lower, True), x.T)
    denominators = np.einsum('ij,ji->i', x, solved)
    zero = ~np.any(x != 0, axis=1)
    scale = np.where(zero, 0.0, factor / np.where(zero, 1.0, denominators))
    return (x * scale[:, None]).T @ x, int(np.count_nonzero(zero))

def christoffel_matrix(sample, gram, integrand=CoverageMode.ONE, chunk_rows=DEFAULT_CHUNK_ROWS, threads=1):
    """Return sum_l w_l x_j x_k [1 or df_l] / (x^T G^-1 x).

    Rows are processed in fixed chunks, in parallel when threads > 1, and
    the partial sums are added in chunk order so the result does not
    depend on the thread count. Rows with x = 0 are skipped and counted.
    """

    mode = CoverageMode(integrand)
    if mode is CoverageMode.DF and sample.df is None:
        raise ConfigError("DF mode needs a sample with df values")
    lower, _ = factor_spd(gram)
    factor = sample.weights if mode is CoverageMode.ONE else sample.weights * sample.df

    bounds = range(0, len(sample), max(1, int(chunk_rows)))
    jobs = [(sample.x[start:start + chunk_rows], lower, factor[start:start + chunk_rows]) for start in bounds]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            partials = list(executor.map(lambda job: _chunk_k_matrix(*job), jobs))
    else:
        partials = [_chunk_k_matrix(*job) for job in jobs]

    values = np.zeros((sample.n_features, sample.n_features))
    skipped = 0
    for partial, zero_rows in partials:
        values += partial
        skipped += zero_rows
    if skipped:
        _logger.info(f"Skipped {skipped} zero feature rows")
    return OperatorMatrix(values, f"christoffel {mode.value}", {'skipped_rows': skipped})

def coverage_spectrum(sample, mode=CoverageMode.ONE, chunk_rows=DEFAULT_CHUNK_ROWS, threads=1):
    """Solve <x|K|x> psi = lambda <x|x> psi, eigenvalues descending."""

    mode = CoverageMode(mode)
    gram = fit_gram(sample)
    kmat = christoffel_matrix(sample, gram, mode, chunk_rows, threads)
    gev = solve_gev(kmat, gram, descending=True)

    counted = np.any(sample.x != 0, axis=1)
    factor = sample.weights if mode is CoverageMode.ONE else sample.weights * sample.df
    diagnostics = dict(gev.diagnostics)
    diagnostics.update(kmat.diagnostics)
    diagnostics['gram_rank'] = gram.diagnostics['rank']
    return CoverageSpectrum(gev.eigenvalues, gev.vectors, float(factor[counted].sum()), mode, diagnostics)

def coverage_share(spectrum, k=None):
    """Return each eigenvalue as a fraction of the total, or with k the
    fraction covered by the k largest."""
    shares = spectrum.eigenvalues / spectrum.total
    if k is None:
        return shares
    if not 0 <= k <= len(shares):
        raise ConfigError(f"k must be in [0, {len(shares)}], found {k}")
    return float(shares[:k].sum())

def christoffel_value(gram, x):
    """Return K(x) = 1/(x^T G^-1 x) for one point or a stack of rows."""
    lower, _ = factor_spd(gram)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    values = 1.0 / np.einsum('ij,ji->i', x, scipy.linalg.cho_solve((lower, True), x.T))
    return values if len(values) > 1 else float(values[0])

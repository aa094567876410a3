#! /usr/bin/env python
# Copyright 2021 National Technology & Engineering Solutions of
# Sandia, LLC (NTESS). Under the terms of Contract DE-NA0003525 with
# NTESS, the U.S. Government retains certain rights in this software.

"""Compare coverage eigenvalues with principal components when one
feature is rescaled."""
import argparse

import numpy as np

from execflow.coverage import FeatureSample, coverage_spectrum, coverage_share

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument('-r', '--rows', type=int, help="sample size", default=10_000)
parser.add_argument('-s', '--scale', type=float, help="factor applied to the first feature", default=1e3)
parser.add_argument('--seed', type=int, default=0)
args = parser.parse_args()

rng = np.random.default_rng(args.seed)
mixing = rng.normal(size=(4, 4)) + 2.0 * np.eye(4)
sample = FeatureSample(rng.normal(size=(args.rows, 4)) @ mixing.T + 1.0)
stretched = sample.transformed(np.diag([args.scale, 1.0, 1.0, 1.0]))

def pca_shares(sample):
    eigenvalues = np.linalg.eigvalsh(np.cov(sample.x, rowvar=False))[::-1]
    return eigenvalues / eigenvalues.sum()

for name, data in (('original', sample), ('stretched', stretched)):
    shares = coverage_share(coverage_spectrum(data))
    print(f"{name:>10} coverage {np.array2string(shares, precision=4)}  "
          f"pca {np.array2string(pca_shares(data), precision=4)}")

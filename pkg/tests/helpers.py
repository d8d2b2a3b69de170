"""Shared builders for the test suite."""

import numpy as np

from perstrees.data import Dataset


def random_dataset(rng, n, d, m, with_cf=False, with_q=False, all_arms=False):
    """A dataset of standard-normal covariates and outcomes.

    all_arms forces every treatment to appear at least once (requires
    n >= m).
    """
    X = rng.normal(size=(n, d))
    T = rng.integers(1, m + 1, size=n)
    if all_arms:
        pos = rng.permutation(n)[:m]
        T[pos] = np.arange(1, m + 1)
    CF = rng.normal(size=(n, m)) if with_cf else None
    if with_cf:
        Y = CF[np.arange(n), T - 1]
    else:
        Y = rng.normal(size=n)
    Q = rng.uniform(0.05, 1.0, size=n) if with_q else None
    return Dataset(X=X, T=T, Y=Y, m=m, CF=CF, Q=Q)


def leaf_argmin_policy(ds, leaf_of):
    """Per-leaf argmin-mean prescriptions for a fixed leaf labeling."""
    n_leaves = int(leaf_of.max())
    choice = {}
    for leaf in range(1, n_leaves + 1):
        rows = np.flatnonzero(leaf_of == leaf)
        means = np.full(ds.m, np.inf)
        for t in range(1, ds.m + 1):
            sel = rows[ds.T[rows] == t]
            if sel.size:
                means[t - 1] = ds.Y[sel].mean()
        choice[leaf] = int(np.argmin(means)) + 1
    return choice

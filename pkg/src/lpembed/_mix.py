"""Test-vector mixtures used to search for extremal ratios.

Each generator returns an ``(n, count)`` array of column samples together
with an integer label per column naming the family it came from.
"""

import numpy as np

from . import _rng

DENSE_FAMILIES = ("gaussian", "sparse", "heavy", "block_flat")
SPARSE_FAMILIES = ("signs", "heavy", "gaussian", "partial")

BATCH = 512


def _batch_rngs(seed, count, tag):
    for b, start in enumerate(range(0, count, BATCH)):
        yield _rng.stream_rng(seed, tag, b), start, min(count, start + BATCH)


def dense_mix(n, count, seed, m=1):
    """Gaussian, random-sparsity, Cauchy and block-flat vectors, cycled.

    Block-flat vectors have equal magnitudes on ``m*k`` coordinates with
    random signs, ``k`` drawn from 1..ceil(n/m).
    """
    X = np.zeros((n, count))
    labels = np.arange(count) % len(DENSE_FAMILIES)
    M = -(-n // m)
    for rng, lo, hi in _batch_rngs(seed, count, _rng.TAG_SAMPLES):
        for t in range(lo, hi):
            fam = labels[t]
            if fam == 0:
                X[:, t] = rng.standard_normal(n)
            elif fam == 1:
                size = int(np.clip(np.exp(rng.uniform(0.0, np.log(n + 1))), 1, n))
                idx = rng.choice(n, size, replace=False)
                X[idx, t] = rng.standard_normal(size)
            elif fam == 2:
                X[:, t] = rng.standard_cauchy(n)
            else:
                size = min(n, m * int(rng.integers(1, M + 1)))
                idx = rng.choice(n, size, replace=False)
                X[idx, t] = rng.choice((-1.0, 1.0), size)
    # a zero sample carries no information about a ratio
    dead = ~X.any(axis=0)
    X[0, dead] = 1.0
    return X, labels


def sparse_mix(n, m, count, seed):
    """Vectors supported on random size-m sets (or smaller, for ``partial``)."""
    X = np.zeros((n, count))
    labels = np.arange(count) % len(SPARSE_FAMILIES)
    for rng, lo, hi in _batch_rngs(seed, count, _rng.TAG_SAMPLES):
        for t in range(lo, hi):
            fam = labels[t]
            size = m if fam != 3 else int(rng.integers(1, m + 1))
            idx = rng.choice(n, size, replace=False)
            if fam == 0:
                c = rng.choice((-1.0, 1.0), size)
            elif fam == 1:
                c = rng.standard_cauchy(size)
            else:
                c = rng.standard_normal(size)
            X[idx, t] = c
    dead = ~X.any(axis=0)
    X[0, dead] = 1.0
    return X, labels

"""Quasi-norms on R^n, non-increasing rearrangement and block decompositions.

Vectors are 1-D arrays. Most functions also accept a 2-D array whose
*columns* are independent vectors (``axis=0``), which is how the checkers
evaluate thousands of samples at once.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError

__all__ = [
    "ExponentTriple",
    "BlockDecomposition",
    "quasi_norm",
    "weak_norm",
    "conjugate_q",
    "inv_q",
    "rearrangement",
    "block_decompose",
    "block_pnorms",
    "tail_block_norm",
    "restrict",
    "rearrangement_tail_bound",
]


def _as_finite(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("vector has non-finite entries")
    return x


def _check_exponent(p, name="p"):
    if not (p > 0) or not math.isfinite(p):
        raise DomainError(f"{name} must be a positive finite real, got {p!r}")


def quasi_norm(x, p, axis=None):
    """Return ``(sum |x_i|^p)^(1/p)``.

    The largest magnitude is factored out first so that small exponents
    do not overflow for large entries.
    """
    _check_exponent(p)
    a = np.abs(_as_finite(x))
    if a.size == 0:
        return 0.0 if axis is None else np.zeros(np.delete(a.shape, axis))
    peak = a.max(axis=axis, keepdims=True)
    safe = np.where(peak > 0, peak, 1.0)
    s = np.sum((a / safe) ** p, axis=axis, keepdims=True) ** (1.0 / p)
    out = np.where(peak > 0, peak * s, 0.0)
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def weak_norm(x, r, axis=None):
    """Weak-l_r quasi-norm ``max_i i^(1/r) x*_i``."""
    _check_exponent(r, "r")
    a = np.abs(_as_finite(x))
    if axis is None:
        a = a.ravel()
        if a.size == 0:
            return 0.0
        srt = np.sort(a)[::-1]
        return float(np.max(np.arange(1, a.size + 1) ** (1.0 / r) * srt))
    srt = -np.sort(-a, axis=axis)
    shape = [1] * a.ndim
    shape[axis] = a.shape[axis]
    ranks = np.arange(1, a.shape[axis] + 1, dtype=np.float64).reshape(shape)
    return np.max(ranks ** (1.0 / r) * srt, axis=axis)


def conjugate_q(p, r):
    """The exponent q with 1/p + 1/q = 1/r; ``inf`` when r == p."""
    _check_exponent(p)
    _check_exponent(r, "r")
    if r > p:
        raise DomainError(f"need r <= p, got r={r}, p={p}")
    if r == p:
        return math.inf
    return 1.0 / (1.0 / r - 1.0 / p)


def inv_q(p, r):
    """1/q, which stays finite (zero) when r == p."""
    conjugate_q(p, r)
    return 1.0 / r - 1.0 / p


@dataclass(frozen=True)
class ExponentTriple:
    """Exponents ``p`` (domain), ``r`` (codomain, r <= 1) and derived ``q``."""

    p: float
    r: float

    def __post_init__(self):
        _check_exponent(self.p)
        _check_exponent(self.r, "r")
        if self.r > 1:
            raise DomainError(f"r must be <= 1, got {self.r}")
        if self.r > self.p:
            raise DomainError(f"need r <= p, got r={self.r}, p={self.p}")

    @property
    def q(self):
        return conjugate_q(self.p, self.r)

    @property
    def inv_q(self):
        return inv_q(self.p, self.r)


def rearrangement(x):
    """Permutation listing indices by |x_i| descending, ties by index."""
    a = np.abs(_as_finite(x))
    return np.argsort(-a, kind="stable")


@dataclass(frozen=True)
class BlockDecomposition:
    """Consecutive size-``m`` blocks of the non-increasing rearrangement of x.

    ``blocks[k]`` holds the (0-based) indices of the (k+1)-th largest block;
    the last block may be shorter than ``m``.
    """

    m: int
    M: int
    blocks: tuple
    perm: np.ndarray

    def pnorms(self, x, p):
        x = np.asarray(x, dtype=np.float64)
        return np.array([quasi_norm(x[b], p) for b in self.blocks])


def block_decompose(x, m):
    x = _as_finite(x)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("block_decompose needs a non-empty 1-D vector")
    if int(m) != m or m < 1:
        raise DomainError(f"block size must be a positive integer, got {m!r}")
    m = int(m)
    n = x.size
    perm = rearrangement(x)
    M = -(-n // m)
    blocks = tuple(perm[k * m:(k + 1) * m] for k in range(M))
    return BlockDecomposition(m=m, M=M, blocks=blocks, perm=perm)


def block_pnorms(x, m, p):
    """l_p norms of the blocks of x, largest block first.

    For a 2-D array the columns are decomposed independently and the result
    has shape ``(M, columns)``.
    """
    _check_exponent(p)
    a = np.abs(_as_finite(x))
    squeeze = a.ndim == 1
    if squeeze:
        a = a[:, None]
    n, cols = a.shape
    M = -(-n // m)
    srt = -np.sort(-a, axis=0)
    padded = np.zeros((M * m, cols))
    padded[:n] = srt
    blocks = padded.reshape(M, m, cols)
    # within a block the first entry is the largest
    peak = blocks[:, 0, :]
    safe = np.where(peak > 0, peak, 1.0)
    s = np.sum((blocks / safe[:, None, :]) ** p, axis=1) ** (1.0 / p)
    out = np.where(peak > 0, peak * s, 0.0)
    return out[:, 0] if squeeze else out


def tail_block_norm(x, m, p, r, start=2):
    """``(sum_{k >= start} |x_{I_k}|_p^r)^(1/r)`` with 1-based block index."""
    norms = block_pnorms(x, m, p)
    tail = norms[start - 1:]
    if tail.shape[0] == 0:
        return 0.0 if norms.ndim == 1 else np.zeros(norms.shape[1])
    return quasi_norm(tail, r, axis=None if norms.ndim == 1 else 0)


def restrict(x, index_set):
    """Copy of x that keeps the coordinates in ``index_set`` and zeroes the rest."""
    x = _as_finite(x)
    idx = np.asarray(list(index_set) if not isinstance(index_set, np.ndarray) else index_set,
                     dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.size):
        raise DomainError("index out of range")
    out = np.zeros_like(x)
    out[idx] = x[idx]
    return out


def rearrangement_tail_bound(x, m, p, r, j):
    """Both sides of the block-tail rearrangement inequality.

    ``lhs = (sum_{k=j}^{M-1} |x_{I_{k+1}}|_p^r)^(1/r)`` and
    ``rhs = m^(-1/q) |x restricted off I_1..I_{j-1}|_r``; always lhs <= rhs.
    """
    if r > p:
        raise DomainError(f"need r <= p, got r={r}, p={p}")
    if j < 1:
        raise DomainError("j must be >= 1")
    dec = block_decompose(x, m)
    x = np.asarray(x, dtype=np.float64)
    norms = dec.pnorms(x, p)
    lhs = quasi_norm(norms[j:], r) if j < dec.M else 0.0
    head = np.concatenate(dec.blocks[:j - 1]) if j > 1 else np.array([], dtype=np.int64)
    rest = x.copy()
    rest[head] = 0.0
    rhs = dec.m ** (-inv_q(p, r)) * quasi_norm(rest, r)
    return lhs, rhs

"""Symmetric p-stable sampling and truncated LePage series.

All draws are keyed by ``(seed, stream)`` through :mod:`lpembed._rng`, so
the i-th column of an operator is reproducible on its own.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import special, stats

from . import _rng
from .errors import DomainError
from .quasinorm import quasi_norm

__all__ = [
    "StableSampler",
    "LePageSeries",
    "ThetaNormEstimate",
    "StabilityCheck",
    "sample_stable",
    "sample_arrivals",
    "sample_direction",
    "sample_directions",
    "lepage_weights",
    "lepage_series",
    "lepage_column",
    "default_depth",
    "weight_tail",
    "estimate_theta_norm",
    "theta_norm_closed_form",
    "stable_abs_moment",
    "check_stability_identity",
    "ks_critical_value",
    "cf_error",
]

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"
MAX_DEPTH = 10**6


def _check_index(p, upper_inclusive=True):
    ok = 0 < p <= 2 if upper_inclusive else 0 < p < 2
    if not ok:
        bound = "(0, 2]" if upper_inclusive else "(0, 2)"
        raise DomainError(f"stability index must lie in {bound}, got {p!r}")


@dataclass(frozen=True)
class StableSampler:
    """Standard symmetric p-stable law, E exp(itX) = exp(-|t|^p)."""

    p: float
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        _check_index(self.p)


def _cms(p, u, w):
    # Chambers-Mallows-Stuck, symmetric case; u ~ U(-pi/2, pi/2), w ~ Exp(1)
    if p == 1.0:
        return np.tan(u)
    if p == 2.0:
        return 2.0 * np.sin(u) * np.sqrt(w)
    return (np.sin(p * u) / np.cos(u) ** (1.0 / p)
            * (np.cos(u - p * u) / w) ** ((1.0 - p) / p))


def sample_stable(sampler, count):
    """``count`` i.i.d. standard symmetric p-stable draws."""
    _check_index(sampler.p)
    rng = _rng.stream_rng(sampler.seed, _rng.TAG_STABLE, sampler.stream)
    u = rng.uniform(-math.pi / 2, math.pi / 2, size=count)
    w = rng.standard_exponential(size=count)
    return _cms(float(sampler.p), u, w)


def sample_arrivals(seed, J, stream=0):
    """Arrival times Gamma_1 < ... < Gamma_J of a unit-rate Poisson process."""
    if J < 1:
        raise DomainError("J must be >= 1")
    rng = _rng.stream_rng(seed, _rng.TAG_ARRIVALS, stream)
    return np.cumsum(rng.standard_exponential(size=int(J)))


def sample_directions(seed, stream, dim, J):
    """J i.i.d. draws uniform over the 2*dim signed basis vectors.

    Returns ``(index, sign)`` arrays with 0-based indices. The draws are
    prefix-consistent: the first J of a longer request are identical.
    """
    if dim < 1:
        raise DomainError("dim must be >= 1")
    rng = _rng.stream_rng(seed, _rng.TAG_DIRECTIONS, stream)
    v = rng.integers(0, 2 * int(dim), size=int(J))
    return v >> 1, 1.0 - 2.0 * (v & 1)


def sample_direction(seed, stream, dim):
    """One signed basis vector as ``(index, sign)``."""
    idx, sign = sample_directions(seed, stream, dim, 1)
    return int(idx[0]), int(sign[0])


@lru_cache(maxsize=8)
def _power_weights(p, J):
    w = np.arange(1, J + 1, dtype=np.float64) ** (-1.0 / p)
    w.setflags(write=False)
    return w


def lepage_weights(p, J, mode=DETERMINISTIC, seed=0, stream=0):
    """Series weights ``j^(-1/p)`` or ``Gamma_j^(-1/p)`` for j = 1..J."""
    if mode == DETERMINISTIC:
        return _power_weights(float(p), int(J))
    if mode == STOCHASTIC:
        return sample_arrivals(seed, J, stream) ** (-1.0 / p)
    raise DomainError(f"unknown mode {mode!r}")


def weight_tail(p, J):
    """``sum_{j > J} j^(-2/p)``, the mean squared l_2 size of a truncated tail."""
    s = 2.0 / p
    if s <= 1:
        return math.inf
    return float(special.zeta(s, J + 1))


def default_depth(p, tol=1e-3, cap=MAX_DEPTH):
    """Smallest J with ``weight_tail(p, J) <= tol**2``, capped at ``cap``."""
    _check_index(p, upper_inclusive=False)
    target = tol * tol
    if weight_tail(p, cap) > target:
        return cap
    lo, hi = 1, cap
    while lo < hi:
        mid = (lo + hi) // 2
        if weight_tail(p, mid) <= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class LePageSeries:
    """A truncated series ``sum_j w_j Y_j`` with signed-basis directions."""

    p: float
    dim: int
    J: int
    weights: np.ndarray
    index: np.ndarray
    sign: np.ndarray

    def vector(self):
        return np.bincount(self.index, weights=self.sign * self.weights,
                           minlength=self.dim).astype(np.float64)


def lepage_series(p, dim, J, seed, stream, mode=DETERMINISTIC):
    _check_index(p, upper_inclusive=False)
    if J < 1:
        raise DomainError("J must be >= 1")
    w = lepage_weights(p, J, mode, seed, stream)
    idx, sign = sample_directions(seed, stream, dim, J)
    return LePageSeries(p=float(p), dim=int(dim), J=int(J), weights=w, index=idx, sign=sign)


def lepage_column(p, dim, J, seed, stream, mode=DETERMINISTIC):
    """Length-``dim`` vector ``sum_{j<=J} w_j Y_j``."""
    return lepage_series(p, dim, J, seed, stream, mode).vector()


@lru_cache(maxsize=8)
def _arrival_tail_variance(p, start, stop):
    # sum_{start < j <= stop} E[Gamma_j^(-2/p)], with E Gamma_j^-a = Gamma(j-a)/Gamma(j)
    if stop <= start:
        return 0.0
    a = 2.0 / p
    j = np.arange(start + 1, stop + 1, dtype=np.float64)
    return float(np.sum(np.exp(special.gammaln(j - a) - special.gammaln(j))))


@dataclass(frozen=True)
class ThetaNormEstimate:
    """Monte-Carlo estimate of ``(E ||Theta||_r^r)^(1/r)``."""

    value: float
    mean_rth_power: float
    stderr: float
    trials: int
    exact_depth: int


def estimate_theta_norm(p, r, dim, J, trials, seed, mode=STOCHASTIC,
                        exact_depth=None, scale=1.0):
    """Estimate the normalizing constant of the stable-type operator.

    Terms ``j <= exact_depth`` are simulated exactly; in stochastic mode the
    remaining terms up to ``J`` are replaced by a per-coordinate Gaussian with
    the matching variance (each coordinate receives thousands of such terms).
    ``exact_depth`` defaults to ``min(J, max(4096, 32 * dim))``.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    _check_index(p, upper_inclusive=False)
    J = int(J)
    if exact_depth is None:
        exact_depth = min(J, max(4096, 32 * int(dim)))
    exact_depth = min(int(exact_depth), J)
    if mode == STOCHASTIC:
        tail_sd = math.sqrt(_arrival_tail_variance(float(p), exact_depth, J) / dim)
    elif exact_depth < J:
        tail_sd = math.sqrt(float(np.sum(_power_weights(float(p), J)[exact_depth:] ** 2)) / dim)
    else:
        tail_sd = 0.0
    powers = np.empty(int(trials))
    base = _rng.derive_seed(seed, _rng.TAG_THETA_NORM)
    for t in range(int(trials)):
        col = lepage_column(p, dim, exact_depth, base, t, mode)
        if tail_sd > 0:
            rng = _rng.stream_rng(base, _rng.TAG_THETA_NORM, t)
            col += rng.normal(0.0, tail_sd, size=int(dim))
        powers[t] = quasi_norm(scale * col, r) ** r
    mean = float(powers.mean())
    se = float(powers.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return ThetaNormEstimate(value=mean ** (1.0 / r), mean_rth_power=mean, stderr=se,
                             trials=int(trials), exact_depth=exact_depth)


def stable_abs_moment(p, r):
    """E|X|^r for a standard symmetric p-stable X, valid for 0 < r < p."""
    if p == 2:
        return 2.0 ** r * math.gamma((1 + r) / 2) / math.sqrt(math.pi)
    if not 0 < r < p:
        raise DomainError("need 0 < r < p")
    return (2.0 ** r * math.gamma((1 + r) / 2) * math.gamma(1 - r / p)
            / (math.gamma(1 - r / 2) * math.sqrt(math.pi)))


def theta_norm_closed_form(p, r, dim):
    """``(E ||Theta||_r^r)^(1/r)`` for the untruncated stochastic series.

    The coordinates of the full series are independent symmetric p-stable
    with scale ``(C_p / dim)^(1/p)``, ``C_p`` the LePage constant.
    """
    if p == 1:
        c = 2.0 / math.pi
    else:
        c = (1 - p) / (math.gamma(2 - p) * math.cos(math.pi * p / 2))
    sigma = (1.0 / (c * dim)) ** (1.0 / p)
    return (dim * sigma ** r * stable_abs_moment(p, r)) ** (1.0 / r)


def ks_critical_value(n1, n2, level=0.001):
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    c = math.sqrt(-0.5 * math.log(level / 2))
    return c * math.sqrt((n1 + n2) / (n1 * n2))


@dataclass(frozen=True)
class StabilityCheck:
    statistic: float
    critical: float
    pvalue: float

    @property
    def passed(self):
        return self.statistic < self.critical


def check_stability_identity(p, coefficients, trials, seed, level=0.001):
    """KS distance between ``sum a_i theta_i`` and ``|a|_p theta``."""
    _check_index(p)
    a = np.asarray(coefficients, dtype=np.float64)
    if not np.any(a):
        raise DomainError("coefficients must not all vanish")
    combo = np.zeros(int(trials))
    for i, ai in enumerate(a):
        combo += ai * sample_stable(StableSampler(p, seed, stream=1 + i), trials)
    ref = quasi_norm(a, p) * sample_stable(StableSampler(p, seed, stream=0), trials)
    res = stats.ks_2samp(combo, ref)
    return StabilityCheck(statistic=float(res.statistic),
                          critical=ks_critical_value(trials, trials, level),
                          pvalue=float(res.pvalue))


def cf_error(p, samples, t):
    """Distance between the empirical characteristic function and exp(-|t|^p)."""
    emp = np.mean(np.cos(t * np.asarray(samples)))
    return float(abs(emp - math.exp(-abs(t) ** p)))

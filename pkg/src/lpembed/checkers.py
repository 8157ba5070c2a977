"""Empirical certification of the restricted isomorphism and block properties.

``check_p1`` is a randomized falsifier (plus an exact scan of the columns):
its certificate says no violation was found, not that none exists.
``check_p2`` verifies an inequality that holds deterministically for the
scaled identity, so any violation there is a bug.
"""

from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np

from . import _mix
from .errors import DomainError, PreconditionError
from .operators import as_operator
from .quasinorm import block_pnorms, inv_q, quasi_norm, tail_block_norm

__all__ = [
    "PropertyCertificate",
    "KashinReport",
    "DistortionReport",
    "check_p1",
    "check_p2",
    "kashin_normalize",
    "kashin_lower_bound",
    "kashin_gamma",
    "check_kashin",
    "measure_distortion",
    "to_record",
]

# relative slack for inequalities that are exact in real arithmetic
FLOAT_SLACK = 1e-9


def to_record(obj):
    """Flat JSON-ready dict of a report dataclass."""
    def clean(v):
        if isinstance(v, np.ndarray):
            return [clean(u) for u in v.tolist()]
        if isinstance(v, (list, tuple)):
            return [clean(u) for u in v]
        if isinstance(v, (np.floating, float)):
            v = float(v)
            return v if math.isfinite(v) else str(v)
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, np.bool_):
            return bool(v)
        return v
    rec = {k: clean(v) for k, v in asdict(obj).items()}
    if hasattr(obj, "passed"):
        rec["passed"] = bool(obj.passed)
    return rec


class _Serializable:
    def to_json(self):
        return json.dumps(to_record(self), sort_keys=True, indent=2)


@dataclass(frozen=True)
class PropertyCertificate(_Serializable):
    property: str
    m: int
    kappa: float | None
    alpha_hat: float
    beta_hat: float
    trials: int
    support_samples: int
    seed: int
    violations: int
    p: float = 1.0
    r: float = 1.0
    exhaustive: bool = False

    @property
    def ratio(self):
        return self.beta_hat / self.alpha_hat if self.alpha_hat > 0 else math.inf

    @property
    def passed(self):
        return self.violations == 0 and 0 < self.alpha_hat <= self.beta_hat


def _ratios(op, X, p, r):
    num = quasi_norm(op.normalization * (op.matrix @ X), r, axis=0)
    return num / quasi_norm(X, p, axis=0)


def check_p1(op, m, p, r, trials=10_000, seed=0, bounds=None):
    """Empirical frame bounds of ``op`` on m-sparse vectors.

    Every column is scanned exactly (the one-hot extremes); for m = 1 that
    scan is the whole answer. For m > 1, ``trials`` random m-sparse vectors
    are added. With ``bounds=(alpha, beta)`` every evaluated ratio outside
    that interval counts as a violation; without bounds only a vanishing
    image (lost injectivity) does.
    """
    op = as_operator(op, p, r)
    if not 1 <= m <= op.n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={op.n}")
    # contiguous rows sum in the same order as a single column would
    values = quasi_norm(np.ascontiguousarray(op.effective.T), r, axis=1)
    supports = op.n
    if m > 1:
        X, _ = _mix.sparse_mix(op.n, int(m), int(trials), seed)
        values = np.concatenate([values, _ratios(op, X, p, r)])
        supports += int(trials)
    if bounds is None:
        violations = int(np.sum(values <= 0))
    else:
        lo, hi = bounds
        violations = int(np.sum((values < lo * (1 - FLOAT_SLACK))
                                | (values > hi * (1 + FLOAT_SLACK))))
    return PropertyCertificate(
        property="P1", m=int(m), kappa=None,
        alpha_hat=float(values.min()), beta_hat=float(values.max()),
        trials=int(values.size), support_samples=supports, seed=int(seed),
        violations=violations, p=float(p), r=float(r), exhaustive=(m == 1),
    )


def check_p2(op, kappa, m, p, r, trials=10_000, seed=0):
    """Count samples breaking ``tail(x) <= ||op x||_r <= (kappa n)^(1/q) |x|_p``."""
    op = as_operator(op, p, r)
    if not 1 <= m <= op.n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={op.n}")
    X, _ = _mix.dense_mix(op.n, int(trials), seed, int(m))
    lhs = tail_block_norm(X, int(m), p, r)
    mid = quasi_norm(op.normalization * (op.matrix @ X), r, axis=0)
    xp = quasi_norm(X, p, axis=0)
    rhs = (kappa * op.n) ** inv_q(p, r) * xp
    bad = (lhs > mid * (1 + FLOAT_SLACK)) | (mid > rhs * (1 + FLOAT_SLACK))
    ratio = mid / xp
    return PropertyCertificate(
        property="P2", m=int(m), kappa=float(kappa),
        alpha_hat=float(ratio.min()), beta_hat=float(ratio.max()),
        trials=int(trials), support_samples=int(trials), seed=int(seed),
        violations=int(bad.sum()), p=float(p), r=float(r),
    )


def kashin_normalize(A, B, certA, certB, m, kappa, n, p, r):
    """Rescale A and B into the two halves U, V of the Kashin-type splitting."""
    if certA.property != "P1" or not certA.passed:
        raise PreconditionError("A needs a passing P1 certificate")
    if certB.property != "P2" or not certB.passed:
        raise PreconditionError("B needs a passing P2 certificate")
    iq = inv_q(p, r)
    U = as_operator(A, p, r).scaled((m / n) ** iq / certA.beta_hat)
    V = as_operator(B, p, r).scaled((kappa * n) ** (-iq))
    return U, V


def kashin_lower_bound(alpha, beta, m, kappa, n, p, r):
    return 4.0 ** (-1.0 / r) * (alpha / beta) * (min(m, 1.0 / kappa) / n) ** inv_q(p, r)


def kashin_gamma(alpha, beta, kappa, n, p, r):
    return alpha / (4.0 ** (1.0 / r) * beta) * (1.0 / (kappa * n)) ** inv_q(p, r)


@dataclass(frozen=True)
class KashinReport(_Serializable):
    lower_bound_formula: float
    gamma: float
    observed_min_ratio: float
    observed_max_ratio: float
    samples: int
    upper_violations: int
    lower_violations: int
    conditional_samples: int
    conditional_upper_violations: int
    sigma_gamma_fraction: float
    argmin_in_sigma_gamma: bool
    argmin_family: str

    @property
    def passed(self):
        return self.upper_violations == 0 and self.lower_violations == 0


def _block_image_norms(U, X, m, r, batch=32):
    """``||U x_{I_k}||_r`` for every block k of every column of X; shape (M, cols)."""
    n, cols = X.shape
    M = -(-n // m)
    mat = U.effective
    out = np.zeros((M, cols))
    order = np.argsort(-np.abs(X), axis=0, kind="stable")
    pad = M * m - n
    for lo in range(0, cols, batch):
        hi = min(cols, lo + batch)
        perm = order[:, lo:hi].T                        # (B, n)
        xs = np.take_along_axis(X[:, lo:hi].T, perm, axis=1)
        contrib = mat[:, perm] * xs[None, :, :]         # (rows, B, n)
        if pad:
            contrib = np.concatenate([contrib, np.zeros(contrib.shape[:2] + (pad,))], axis=2)
        blocks = contrib.reshape(mat.shape[0], hi - lo, M, m).sum(axis=3)
        out[:, lo:hi] = quasi_norm(blocks, r, axis=0).T
    return out


def check_kashin(U, V, p, r, m, kappa, alpha, beta, samples=10_000, seed=0):
    """Sample ``(||Ux||_r + ||Vx||_r) / |x|_p`` against both Kashin bounds.

    Besides the raw bound checks, every sample whose blocks satisfy the P1
    upper bound of U and whose image satisfies the P2 upper bound of V is
    counted separately; on those the upper bound 3 is a theorem.
    """
    U = as_operator(U, p, r)
    V = as_operator(V, p, r)
    if U.n != V.n:
        raise DomainError("U and V must share the domain dimension")
    n = U.n
    iq = inv_q(p, r)
    X, labels = _mix.dense_mix(n, int(samples), seed, int(m))
    xp = quasi_norm(X, p, axis=0)
    u = quasi_norm(U.effective @ X, r, axis=0)
    v = quasi_norm(V.effective @ X, r, axis=0)
    ratio = (u + v) / xp
    lower = kashin_lower_bound(alpha, beta, m, kappa, n, p, r)
    gamma = kashin_gamma(alpha, beta, kappa, n, p, r)

    block_img = _block_image_norms(U, X, int(m), r)
    block_cap = (m / n) ** iq * block_pnorms(X, int(m), p)
    ok_blocks = np.all(block_img <= block_cap * (1 + FLOAT_SLACK), axis=0)
    ok_v = v <= xp * (1 + FLOAT_SLACK)
    cond = ok_blocks & ok_v
    over = ratio > 3.0 * (1 + FLOAT_SLACK)
    in_sigma = v / xp <= gamma
    k = int(np.argmin(ratio))
    return KashinReport(
        lower_bound_formula=float(lower), gamma=float(gamma),
        observed_min_ratio=float(ratio.min()), observed_max_ratio=float(ratio.max()),
        samples=int(samples),
        upper_violations=int(over.sum()),
        lower_violations=int(np.sum(ratio < lower * (1 - FLOAT_SLACK))),
        conditional_samples=int(cond.sum()),
        conditional_upper_violations=int(np.sum(over & cond)),
        sigma_gamma_fraction=float(in_sigma.mean()),
        argmin_in_sigma_gamma=bool(in_sigma[k]),
        argmin_family=_mix.DENSE_FAMILIES[labels[k]],
    )


@dataclass(frozen=True)
class DistortionReport(_Serializable):
    min_ratio: float
    max_ratio: float
    samples: int
    upper_bound: float
    upper_violations: int
    sandwich_checked: bool
    sandwich_violations: int
    argmin_family: str
    histogram: list = field(default_factory=list)
    bin_edges: list = field(default_factory=list)

    @property
    def passed(self):
        return self.upper_violations == 0 and self.sandwich_violations == 0


def measure_distortion(W, p, r, samples=10_000, seed=0, m=1, bins=20):
    """Extremes of ``|Wx|_r / |x|_p`` over the dense sample mix.

    For a stacked ``W`` operator each sample is also checked against
    ``sum <= (|x|_r^r + |S~x|_r^r)^(1/r) = n^(1/q)|Wx|_r <= 2^(1/r) sum``
    where ``sum = |x|_r + |S~x|_r``.
    """
    W = as_operator(W, p, r)
    if samples < 1:
        raise DomainError("samples must be >= 1")
    X, labels = _mix.dense_mix(W.n, int(samples), seed, int(m))
    img = W.effective @ X
    wr = quasi_norm(img, r, axis=0)
    ratio = wr / quasi_norm(X, p, axis=0)
    bound = 3.0 * 2.0 ** (1.0 / r)
    sandwich_bad = 0
    checked = W.kind == "W"
    if checked:
        scale = W.n ** inv_q(p, r)
        top = quasi_norm(scale * img[:W.n], r, axis=0)
        bottom = quasi_norm(scale * img[W.n:], r, axis=0)
        middle = (top ** r + bottom ** r) ** (1.0 / r)
        total = top + bottom
        bad = ((np.abs(scale * wr - middle) > FLOAT_SLACK * middle)
               | (total > middle * (1 + FLOAT_SLACK))
               | (middle > 2.0 ** (1.0 / r) * total * (1 + FLOAT_SLACK)))
        sandwich_bad = int(bad.sum())
    counts, edges = np.histogram(ratio, bins=bins)
    return DistortionReport(
        min_ratio=float(ratio.min()), max_ratio=float(ratio.max()), samples=int(samples),
        upper_bound=bound, upper_violations=int(np.sum(ratio > bound)),
        sandwich_checked=checked, sandwich_violations=sandwich_bad,
        argmin_family=_mix.DENSE_FAMILIES[labels[int(np.argmin(ratio))]],
        histogram=counts.tolist(), bin_edges=edges.tolist(),
    )

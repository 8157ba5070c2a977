"""Null-space checks, Gelfand-ratio estimates and the l_r decoder.

The decoder solves ``min |z|_r  s.t.  S z = S y`` by iteratively reweighted
least squares with a shrinking smoothing parameter. For r = 1 this converges
to the convex optimum; for r < 1 it is a heuristic, and outcomes record
enough of the iteration to diagnose failures.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg

from . import _rng
from .errors import DomainError, PreconditionError, SolverError
from .quasinorm import inv_q, quasi_norm, tail_block_norm, weak_norm

__all__ = [
    "KernelBasis",
    "NullspaceReport",
    "GelfandEstimate",
    "DecoderOptions",
    "RecoveryOutcome",
    "BoundCheck",
    "kernel_basis",
    "sample_kernel",
    "nullspace_factor",
    "check_nullspace_1",
    "check_nullspace_2",
    "gelfand_ratio",
    "calibrated_sparsity",
    "delta_r",
    "recovery_error_bound_check",
    "best_s_term_residual",
    "error_bound_terms",
]


def _matrix(S):
    if hasattr(S, "effective"):
        return S.effective
    return np.atleast_2d(np.asarray(S, dtype=np.float64))


@dataclass(frozen=True)
class KernelBasis:
    matrix: np.ndarray      # n x d, orthonormal columns
    residual: float
    rank: int

    @property
    def dim(self):
        return self.matrix.shape[1]


def kernel_basis(S, tol=None):
    """Orthonormal basis of the numerical null space (SVD based)."""
    A = _matrix(S)
    basis = scipy.linalg.null_space(A, rcond=tol)
    resid = float(np.abs(A @ basis).max()) if basis.size else 0.0
    return KernelBasis(matrix=basis, residual=resid, rank=A.shape[1] - basis.shape[1])


def sample_kernel(kernel, count, seed):
    """Random kernel vectors: Gaussian combinations of all or a few basis vectors."""
    K = kernel.matrix
    n, d = K.shape
    rng = _rng.stream_rng(seed, _rng.TAG_KERNEL)
    C = rng.standard_normal((d, count))
    # every other sample mixes only a handful of basis vectors
    few = min(d, 4)
    for t in range(1, count, 2):
        keep = rng.choice(d, few, replace=False)
        mask = np.zeros(d, dtype=bool)
        mask[keep] = True
        C[~mask, t] = 0.0
    return K @ C


def nullspace_factor(p, alpha, beta):
    """``(1 + (beta/alpha)^p)^(1/p)``."""
    return (1.0 + (beta / alpha) ** p) ** (1.0 / p)


@dataclass(frozen=True)
class NullspaceReport:
    samples: int
    violations: int
    min_margin: float
    median_margin: float
    factor: float
    sparse_samples: int = 0
    skipped: bool = False
    notice: str = ""

    @property
    def passed(self):
        return self.violations == 0 and self.sparse_samples == 0


def _skip(notice):
    return NullspaceReport(samples=0, violations=0, min_margin=math.inf, median_margin=math.inf,
                           factor=math.nan, skipped=True, notice=notice)


def check_nullspace_1(S, m, p, r, alpha, beta, samples=10_000, seed=0, kernel=None):
    """Check ``|h|_p <= K (sum_{k>=2} |h_{I_k}|_p^r)^(1/r)`` on sampled kernel vectors.

    ``margin`` is rhs/lhs, so values above 1 mean the inequality holds.
    """
    kernel = kernel if kernel is not None else kernel_basis(S)
    if kernel.dim == 0:
        return _skip("trivial kernel")
    H = sample_kernel(kernel, int(samples), seed)
    factor = nullspace_factor(p, alpha, beta)
    lhs = quasi_norm(H, p, axis=0)
    rhs = factor * tail_block_norm(H, int(m), p, r)
    margin = rhs / lhs
    scale = np.abs(H).max(axis=0)
    support = np.sum(np.abs(H) > 1e-10 * scale, axis=0)
    return NullspaceReport(
        samples=int(samples), violations=int(np.sum(margin < 1.0)),
        min_margin=float(margin.min()), median_margin=float(np.median(margin)),
        factor=factor, sparse_samples=int(np.sum(support <= m)),
    )


def check_nullspace_2(S, m, s, p, r, alpha, beta, samples=10_000, seed=0, kernel=None):
    """Check ``|h_I|_r <= (s/m)^(1/q) K |h|_r`` with I the top-s coordinates of h."""
    if not 1 <= s <= m:
        raise DomainError("need 1 <= s <= m")
    kernel = kernel if kernel is not None else kernel_basis(S)
    if kernel.dim == 0:
        return _skip("trivial kernel")
    H = sample_kernel(kernel, int(samples), seed)
    factor = (s / m) ** inv_q(p, r) * nullspace_factor(p, alpha, beta)
    top = -np.sort(-np.abs(H), axis=0)[:s]
    lhs = quasi_norm(top, r, axis=0)
    rhs = factor * quasi_norm(H, r, axis=0)
    margin = rhs / lhs
    return NullspaceReport(
        samples=int(samples), violations=int(np.sum(margin < 1.0)),
        min_margin=float(margin.min()), median_margin=float(np.median(margin)),
        factor=factor,
    )


@dataclass(frozen=True)
class GelfandEstimate:
    n: int
    k: int
    max_ratio: float
    reference: float
    C_hat: float
    samples: int


def gelfand_ratio(S, p, r, samples=2000, seed=0, kernel=None):
    """Largest sampled ``|h|_p / |h|_{r,inf}`` on ker S against ``(log(1+n/k)/k)^(1/q)``."""
    A = _matrix(S)
    k, n = A.shape
    kernel = kernel if kernel is not None else kernel_basis(A)
    if kernel.dim == 0:
        raise PreconditionError("kernel is trivial")
    H = sample_kernel(kernel, int(samples), seed)
    ratio = quasi_norm(H, p, axis=0) / weak_norm(H, r, axis=0)
    ref = (math.log1p(n / k) / k) ** inv_q(p, r)
    mx = float(ratio.max())
    return GelfandEstimate(n=n, k=k, max_ratio=mx, reference=ref, C_hat=mx / ref,
                           samples=int(samples))


def calibrated_sparsity(m, p, r, alpha, beta):
    """Largest real s with ``(s/m)^(1/q) K <= 4^(-1/r)``."""
    return m * (4.0 ** (-1.0 / r) / nullspace_factor(p, alpha, beta)) ** (1.0 / inv_q(p, r))


# ------------------------------------------------------------------- decoder

# objective excess over |y|_r tolerated before returning y itself; rounding in
# the objective of an exact decode is far smaller
FALLBACK_SLACK = 1e-9

@dataclass(frozen=True)
class DecoderOptions:
    max_iter: int = 5000
    eps0: float = 1.0
    eps_decay: float = 0.7
    feas_tol: float = 1e-8
    sparsity_hint: int | None = None
    step_tol: float = 1e-9
    polish: bool = True
    exact_tol: float = 1e-6
    # eps decays once a step is below settle_ratio * eps * sqrt(n), or after
    # settle_cap iterations at the same eps
    settle_ratio: float = 0.3
    settle_cap: int = 30


@dataclass(frozen=True)
class RecoveryOutcome:
    estimate: np.ndarray
    feasibility_gap: float
    objective: float
    iterations: int
    epsilon_final: float
    exact: bool
    fallback: bool = False
    polished: bool = False
    trace: list = field(default_factory=list)
    # exactness of the decoder's own point, before any fallback to y
    decoded_exact: bool = False


def _smoothed(z, eps, r):
    return float(np.sum((z * z + eps * eps) ** (r / 2.0)))


def _weighted_min_norm(A, b, d):
    """argmin sum z_i^2 / d_i subject to A z = b, i.e. z = D A^T (A D A^T)^-1 b."""
    G = (A * d) @ A.T
    try:
        lam = scipy.linalg.solve(G, b, assume_a="pos", check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        lam = np.linalg.lstsq(G, b, rcond=None)[0]
    return d * (A.T @ lam)


def _support_fit(A, b, z, support, feas_tol):
    sub = A[:, support]
    coef, _, rank, _ = np.linalg.lstsq(sub, b, rcond=None)
    if rank < support.size:
        return None
    out = np.zeros_like(z)
    out[support] = coef
    if np.linalg.norm(A @ out - b) > feas_tol:
        return None
    return out


def _polish(A, b, z, r, feas_tol):
    """Snap z to an exact solution on a small support, if one beats it.

    Tries the support ``|z_i| > 1e-6 max|z|`` first and then the top-j
    entries of z for j = rank(A), ..., 1; returns the feasible candidate with
    the smallest r-norm, or None.
    """
    peak = np.abs(z).max()
    if peak == 0:
        return None
    rank = np.linalg.matrix_rank(A)
    support = np.flatnonzero(np.abs(z) > 1e-6 * peak)
    best = None
    if support.size <= rank:
        best = _support_fit(A, b, z, support, feas_tol)
    if best is None or not np.allclose(best, z, rtol=0, atol=1e-6 * peak):
        order = np.argsort(-np.abs(z), kind="stable")
        for j in range(min(rank, support.size), 0, -1):
            cand = _support_fit(A, b, z, order[:j], feas_tol)
            if cand is not None and (best is None or quasi_norm(cand, r) < quasi_norm(best, r)):
                best = cand
    return best


def delta_r(S, y, r, opts=None):
    """Approximate ``argmin |z|_r subject to S z = S y`` by IRLS.

    Weights ``(z_i^2 + eps^2)^(r/2 - 1)``; eps follows
    ``min(eps, z*_{s+1} / n)`` with a sparsity hint ``s``, else decays
    geometrically once the iterate has settled at the current eps. The
    result is never worse than y itself in the r-norm.

    ``trace`` holds one ``(eps, smoothed_before, smoothed_after, gap)`` tuple
    per iteration, where the smoothed objective is ``sum (z_i^2 + eps^2)^(r/2)``
    evaluated at the same eps before and after the step.
    """
    if not 0 < r <= 1:
        raise DomainError("r must lie in (0, 1]")
    opts = opts or DecoderOptions()
    A = _matrix(S)
    y = np.asarray(y, dtype=np.float64)
    k, n = A.shape
    if y.shape != (n,):
        raise DomainError(f"y must have length {n}")
    b = A @ y
    bnorm = float(np.linalg.norm(b))
    feas = opts.feas_tol * max(1.0, bnorm)
    y_obj = quasi_norm(y, r)
    ymax = float(np.abs(y).max()) if y.size else 0.0

    def matches(z):
        if ymax == 0:
            return not z.any()
        return bool(float(np.abs(z - y).max()) <= opts.exact_tol * ymax)

    def outcome(z, its, eps, decoded_exact, fallback=False, polished=False, trace=()):
        gap = float(np.linalg.norm(A @ z - b))
        return RecoveryOutcome(estimate=z, feasibility_gap=gap, objective=quasi_norm(z, r),
                               iterations=its, epsilon_final=eps, exact=matches(z),
                               fallback=fallback, polished=polished, trace=list(trace),
                               decoded_exact=decoded_exact)

    if bnorm == 0.0:
        # y is feasible and 0 beats every other point
        return outcome(np.zeros(n), 0, 0.0, matches(np.zeros(n)))
    if k >= n and np.linalg.matrix_rank(A) == n:
        return outcome(y.copy(), 0, 0.0, True)

    z = np.linalg.lstsq(A, b, rcond=None)[0]
    if np.linalg.norm(A @ z - b) > feas:
        raise SolverError("least-squares initialization is infeasible")
    eps = opts.eps0 * max(1.0, float(np.abs(z).max()))
    floor = 1e-14 * max(1.0, float(np.abs(z).max()))
    trace = []
    its = held = 0
    for its in range(1, opts.max_iter + 1):
        d = (z * z + eps * eps) ** (1.0 - r / 2.0)
        z_new = _weighted_min_norm(A, b, d)
        resid = A @ z_new - b
        if np.linalg.norm(resid) > feas:
            # one projection back onto the affine set, then give up on this step
            z_new = z_new - np.linalg.lstsq(A, resid, rcond=None)[0]
            if np.linalg.norm(A @ z_new - b) > feas:
                its -= 1
                break
        before, after = _smoothed(z, eps, r), _smoothed(z_new, eps, r)
        trace.append((eps, before, after, float(np.linalg.norm(A @ z_new - b))))
        step = float(np.linalg.norm(z_new - z))
        z = z_new
        held += 1
        if step <= opts.step_tol * max(1.0, float(np.linalg.norm(z))):
            break
        if opts.sparsity_hint is not None and opts.sparsity_hint < n:
            tail = np.partition(np.abs(z), n - 1 - opts.sparsity_hint)[n - 1 - opts.sparsity_hint]
            eps = min(eps, tail / n)
        elif step <= opts.settle_ratio * eps * math.sqrt(n) or held >= opts.settle_cap:
            # shrinking eps before the iterate settles can trap coordinates near 0
            eps *= opts.eps_decay
            held = 0
        if eps <= floor:
            break

    polished = False
    if opts.polish:
        cand = _polish(A, b, z, r, feas)
        if cand is not None and quasi_norm(cand, r) <= quasi_norm(z, r) * (1 + 1e-12):
            z, polished = cand, True

    gap = float(np.linalg.norm(A @ z - b))
    if gap > feas:
        raise SolverError(f"feasibility gap {gap:.3e} exceeds tolerance {feas:.3e}")
    decoded = matches(z)
    if quasi_norm(z, r) > y_obj + FALLBACK_SLACK:
        return outcome(y.copy(), its, eps, decoded, fallback=True, trace=trace)
    return outcome(z, its, eps, decoded, polished=polished, trace=trace)


def best_s_term_residual(y, s, r):
    """``inf_{|I|<=s} |y - y_I|_r``, attained by keeping the s largest entries."""
    a = np.sort(np.abs(np.asarray(y, dtype=np.float64)))[::-1]
    return quasi_norm(a[s:], r) if s < a.size else 0.0


def error_bound_terms(y, estimate, s, r):
    """``(|y - estimate|_r, 4^(1/r) inf_{|I|<=s} |y - y_I|_r)``."""
    y = np.asarray(y, dtype=np.float64)
    return quasi_norm(y - estimate, r), 4.0 ** (1.0 / r) * best_s_term_residual(y, s, r)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    s: int
    s_bound: float
    outcome: RecoveryOutcome

    @property
    def passed(self):
        return self.lhs <= self.rhs * (1 + 1e-9) + 1e-12


def recovery_error_bound_check(S, y, s, r, alpha, beta, m, p, opts=None, enforce=True):
    """Decode y and compare ``|y - D(y)|_r`` with ``4^(1/r) inf_{|I|<=s} |y - y_I|_r``.

    With ``enforce`` the sparsity level must satisfy the calibrated bound
    from the empirical frame constants.
    """
    bound = calibrated_sparsity(m, p, r, alpha, beta)
    if enforce and s > bound:
        raise PreconditionError(f"s={s} exceeds the calibrated bound {bound:.3g}")
    out = delta_r(S, y, r, opts)
    lhs, rhs = error_bound_terms(y, out.estimate, s, r)
    return BoundCheck(lhs=lhs, rhs=rhs, s=int(s), s_bound=bound, outcome=out)

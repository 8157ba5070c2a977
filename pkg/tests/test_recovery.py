import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpembed import checkers, operators as ops, recovery as rec
from lpembed.errors import DomainError, PreconditionError, SolverError
from lpembed.quasinorm import quasi_norm, weak_norm

from oracles import l1_vertex_oracle


@pytest.fixture(scope="module")
def S64():
    return ops.build_S(64, 0.5, 1.5, J=500, seed=4)


def test_kernel_of_row_of_ones():
    kb = rec.kernel_basis(np.array([[1.0, 1.0]]))
    assert kb.dim == 1 and kb.rank == 1
    v = kb.matrix[:, 0] * np.sign(kb.matrix[0, 0])
    assert np.allclose(v, [2 ** -0.5, -(2 ** -0.5)], atol=1e-15)


@pytest.mark.parametrize("k, n", [(3, 7), (10, 40), (1, 5)])
def test_kernel_dimension_and_residual(k, n):
    A = np.random.default_rng(k + n).standard_normal((k, n))
    kb = rec.kernel_basis(A)
    assert kb.dim == n - np.linalg.matrix_rank(A) == n - k
    assert kb.residual <= 1e-10 * np.abs(A).max()
    assert np.allclose(kb.matrix.T @ kb.matrix, np.eye(kb.dim), atol=1e-12)


def test_kernel_rank_deficient():
    A = np.ones((3, 6))
    assert rec.kernel_basis(A).dim == 5


def test_kernel_samples_lie_in_kernel(S64):
    kb = rec.kernel_basis(S64)
    H = rec.sample_kernel(kb, 50, seed=1)
    assert np.abs(S64.matrix @ H).max() <= 1e-10 * np.abs(S64.matrix).max() * np.abs(H).max()


def test_nullspace_factor_isometric_case():
    assert rec.nullspace_factor(1.5, 2.0, 2.0) == pytest.approx(2 ** (1 / 1.5), rel=1e-15)


def test_nullspace_checks_skip_trivial_kernel():
    rep = rec.check_nullspace_1(np.eye(4), 1, 1.5, 1.0, 1.0, 1.0, samples=10)
    assert rep.skipped and rep.notice
    rep2 = rec.check_nullspace_2(np.eye(4), 2, 1, 1.5, 1.0, 1.0, 1.0, samples=10)
    assert rep2.skipped


@pytest.mark.parametrize("r", [0.5, 1.0])
def test_nullspace_properties_on_certified_S(S64, r):
    m = 3
    cert = checkers.check_p1(S64, m, 1.5, r, trials=2000, seed=2)
    assert cert.passed
    a, b = cert.alpha_hat, cert.beta_hat
    one = rec.check_nullspace_1(S64, m, 1.5, r, a, b, samples=2000, seed=3)
    two = rec.check_nullspace_2(S64, m, 1, 1.5, r, a, b, samples=2000, seed=3)
    assert one.passed and one.sparse_samples == 0 and one.min_margin >= 1
    assert two.passed and two.min_margin >= 1


def test_nullspace_2_s_equal_m_isometric():
    kb = rec.kernel_basis(np.random.default_rng(0).standard_normal((4, 12)))
    rep = rec.check_nullspace_2(None, 3, 3, 1.2, 0.5, 1.0, 1.0, samples=300, seed=0, kernel=kb)
    assert rep.factor == pytest.approx(2 ** (1 / 1.2))
    assert rep.violations == 0


def test_nullspace_2_domain():
    with pytest.raises(DomainError):
        rec.check_nullspace_2(np.ones((1, 3)), 2, 3, 1.5, 1.0, 1.0, 1.0)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=8), st.integers(1, 8),
       st.floats(0.2, 1.0))
def test_top_s_support_is_worst_case(vals, s, r):
    h = np.array(vals)
    s = min(s, h.size)
    top = -np.sort(-np.abs(h))[:s]
    brute = max(quasi_norm(h[list(I)], r) for I in itertools.combinations(range(h.size), s))
    assert quasi_norm(top, r) == pytest.approx(brute, rel=1e-12, abs=1e-300)
    assert rec.best_s_term_residual(h, s, r) == pytest.approx(
        min(quasi_norm(np.delete(h, list(I)), r) if s < h.size else 0.0
            for I in itertools.combinations(range(h.size), s)), rel=1e-12, abs=1e-300)


def test_gelfand_ratio_basic(S64):
    est = rec.gelfand_ratio(S64, 1.5, 0.5, samples=300, seed=1)
    assert est.n == 64 and est.k == 32
    assert 0 < est.C_hat < np.inf
    assert est.C_hat == pytest.approx(est.max_ratio / est.reference)


@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
@settings(max_examples=20)
def test_gelfand_quantity_scale_invariant(lam, seed):
    h = np.random.default_rng(seed).standard_normal(16)
    ratio = quasi_norm(h, 1.5) / weak_norm(h, 0.5)
    assert quasi_norm(lam * h, 1.5) / weak_norm(lam * h, 0.5) == pytest.approx(ratio, rel=1e-12)


def test_gelfand_trivial_kernel():
    with pytest.raises(PreconditionError):
        rec.gelfand_ratio(np.eye(3), 1.5, 1.0)


def test_decoder_zero_signal():
    out = rec.delta_r(np.ones((2, 5)), np.zeros(5), 0.5)
    assert out.exact and not out.estimate.any() and out.iterations == 0


def test_decoder_two_by_one_example():
    A = np.array([[1.0, 2.0]])
    out = rec.delta_r(A, np.array([1.0, 0.0]), 1.0)
    t = np.linspace(-2, 2, 400_001)
    grid = np.abs(1 - 2 * t) + np.abs(t)
    assert out.objective == pytest.approx(grid.min(), abs=1e-5)
    assert np.allclose(out.estimate, [0.0, 0.5], atol=1e-6)
    assert not out.exact


def test_decoder_full_rank_returns_signal():
    y = np.array([1.0, -2.0, 3.0])
    out = rec.delta_r(np.eye(3), y, 0.5)
    assert out.exact and np.array_equal(out.estimate, y)


@pytest.mark.parametrize("r", [0.5, 1.0])
def test_decoder_recovers_sparse_signal(S64, r):
    rng = np.random.default_rng(5)
    for _ in range(5):
        y = np.zeros(64)
        y[rng.choice(64, 3, replace=False)] = rng.choice((-1.0, 1.0), 3)
        out = rec.delta_r(S64, y, r)
        assert out.decoded_exact and out.exact and not out.fallback
        assert np.abs(out.estimate - y).max() <= 1e-6


@pytest.mark.parametrize("r", [0.3, 0.5, 0.8, 1.0])
@pytest.mark.parametrize("hint", [None, 4])
def test_decoder_trace_monotone_and_feasible(S64, r, hint):
    y = np.random.default_rng(int(r * 10)).standard_normal(64)
    y[10:] *= 0.01
    opts = rec.DecoderOptions(sparsity_hint=hint)
    out = rec.delta_r(S64, y, r, opts)
    tol = opts.feas_tol * max(1.0, np.linalg.norm(S64.matrix @ y))
    assert out.trace
    for eps, before, after, gap in out.trace:
        assert after <= before * (1 + 1e-12)
        assert gap <= tol
    assert out.feasibility_gap <= tol
    assert out.objective <= quasi_norm(y, r) + 1e-8


@given(st.integers(0, 10_000), st.floats(0.2, 1.0), st.integers(2, 5), st.integers(5, 9))
@settings(max_examples=30)
def test_decoder_never_worse_than_signal(seed, r, k, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((k, n))
    y = rng.standard_cauchy(n)
    out = rec.delta_r(A, y, r, rec.DecoderOptions(max_iter=25))
    assert out.objective <= quasi_norm(y, r) + 1e-8


def test_decoder_fallback_returns_signal():
    A = np.random.default_rng(1).standard_normal((3, 8))
    y = np.zeros(8)
    y[2] = 1.0
    out = rec.delta_r(A, y, 0.3, rec.DecoderOptions(max_iter=1, polish=False))
    assert out.fallback and np.array_equal(out.estimate, y)
    assert out.exact and not out.decoded_exact


@pytest.mark.parametrize("seed", range(10))
def test_decoder_matches_vertex_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n, k = rng.integers(4, 9), rng.integers(1, 5)
    A = rng.standard_normal((k, n))
    y = rng.standard_normal(n)
    out = rec.delta_r(A, y, 1.0)
    assert out.objective == pytest.approx(l1_vertex_oracle(A, A @ y), abs=1e-4)


def test_decoder_domain():
    with pytest.raises(DomainError):
        rec.delta_r(np.ones((1, 2)), np.ones(2), 1.5)
    with pytest.raises(DomainError):
        rec.delta_r(np.ones((1, 2)), np.ones(3), 1.0)
    with pytest.raises(SolverError):
        rec.delta_r(np.ones((1, 2)), np.array([1.0, 0.0]), 1.0, rec.DecoderOptions(feas_tol=0.0))


def test_calibrated_sparsity_solves_the_defining_equation():
    m, p, r, a, b = 40, 1.5, 0.5, 1.0, 1.3
    s = rec.calibrated_sparsity(m, p, r, a, b)
    lhs = (s / m) ** (1 / r - 1 / p) * rec.nullspace_factor(p, a, b)
    assert lhs == pytest.approx(4 ** (-1 / r), rel=1e-12)


def test_error_bound_sparse_needs_exact_decode(S64):
    y = np.zeros(64)
    y[[3, 30]] = [1.0, -1.0]
    chk = rec.recovery_error_bound_check(S64, y, 2, 1.0, 1.0, 1.0, 64, 1.5, enforce=False)
    assert chk.rhs == 0.0 and chk.passed and chk.outcome.exact


def test_error_bound_with_noise(S64):
    rng = np.random.default_rng(3)
    y = np.zeros(64)
    y[[1, 9]] = [2.0, -1.5]
    y += 1e-3 * rng.standard_normal(64)
    chk = rec.recovery_error_bound_check(S64, y, 2, 1.0, 1.0, 1.0, 64, 1.5, enforce=False)
    assert chk.passed
    assert chk.rhs == pytest.approx(4 * quasi_norm(np.sort(np.abs(y))[:-2], 1.0))


def test_error_bound_enforces_calibrated_sparsity(S64):
    with pytest.raises(PreconditionError):
        rec.recovery_error_bound_check(S64, np.ones(64), 5, 1.0, 1.0, 2.0, 10, 1.5)

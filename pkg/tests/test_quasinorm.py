import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from lpembed.errors import DomainError
from lpembed.quasinorm import (
    ExponentTriple,
    block_decompose,
    block_pnorms,
    conjugate_q,
    inv_q,
    quasi_norm,
    rearrangement_tail_bound,
    restrict,
    tail_block_norm,
    weak_norm,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 24), elements=finite)
exponents = st.floats(0.05, 4.0)
small_r = st.floats(0.05, 1.0)


@pytest.mark.parametrize("x, p, expected", [
    ([1.0, 0.0, 0.0], 2, 1.0),
    ([1.0, 1.0, 1.0, 1.0], 2, 2.0),
    ([1.0, 1.0], 0.5, 4.0),
    ([3.0, -4.0], 2, 5.0),
    ([0.0, 0.0], 0.3, 0.0),
])
def test_quasi_norm_examples(x, p, expected):
    assert quasi_norm(x, p) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("bad", [[np.nan, 1.0], [np.inf]])
def test_quasi_norm_rejects_non_finite(bad):
    with pytest.raises(DomainError):
        quasi_norm(bad, 1.0)


@pytest.mark.parametrize("p", [0.0, -1.0, math.inf, math.nan])
def test_quasi_norm_rejects_bad_exponent(p):
    with pytest.raises(DomainError):
        quasi_norm([1.0], p)


def test_quasi_norm_small_exponent_does_not_overflow():
    # naive sum |x|^r would be fine here, but the result overflows unless factored
    x = np.full(4, 1e300)
    assert quasi_norm(x, 0.25) == pytest.approx(1e300 * 4.0 ** 4, rel=1e-12)
    assert quasi_norm([1e-300, 1e-300], 0.1) == pytest.approx(1e-300 * 2.0 ** 10, rel=1e-12)


def test_quasi_norm_axis_matches_columns(rng):
    X = rng.standard_normal((7, 5))
    X[:, 2] = 0.0
    cols = quasi_norm(X, 0.7, axis=0)
    assert np.allclose(cols, [quasi_norm(X[:, j], 0.7) for j in range(5)], rtol=1e-14)


@pytest.mark.parametrize("x, r, expected", [
    ([1.0, 0.0], 1.0, 1.0),
    ([1.0, 0.5, 1.0 / 3.0], 1.0, 1.0),
    ([2.0, 2.0, 2.0], 2.0, 2.0 * math.sqrt(3.0)),
])
def test_weak_norm_examples(x, r, expected):
    assert weak_norm(x, r) == pytest.approx(expected, rel=1e-14)


def test_weak_norm_matches_definition(rng):
    x = rng.standard_cauchy(30)
    srt = sorted(np.abs(x), reverse=True)
    oracle = max((i + 1) ** (1 / 0.6) * v for i, v in enumerate(srt))
    assert weak_norm(x, 0.6) == pytest.approx(oracle, rel=1e-13)
    X = rng.standard_normal((9, 4))
    assert np.allclose(weak_norm(X, 0.5, axis=0), [weak_norm(X[:, j], 0.5) for j in range(4)])


@pytest.mark.parametrize("p, r, q", [(2, 1, 2), (1, 0.5, 1), (1.5, 1, 3)])
def test_conjugate_q_examples(p, r, q):
    assert conjugate_q(p, r) == pytest.approx(q, rel=1e-12)
    assert inv_q(p, r) == pytest.approx(1.0 / q, rel=1e-12)


def test_conjugate_q_edge_cases():
    assert conjugate_q(1.0, 1.0) == math.inf
    assert inv_q(0.7, 0.7) == 0.0
    with pytest.raises(DomainError):
        conjugate_q(1.0, 1.5)


@given(p=st.floats(0.1, 4.0), r=st.floats(0.05, 1.0))
def test_exponent_triple_identity(p, r):
    if r > p:
        with pytest.raises(DomainError):
            ExponentTriple(p, r)
        return
    t = ExponentTriple(p, r)
    if math.isfinite(t.q):
        assert abs((1 / t.p + 1 / t.q) - 1 / t.r) <= 1e-12 / t.r


def test_exponent_triple_rejects_r_above_one():
    with pytest.raises(DomainError):
        ExponentTriple(2.0, 1.5)


def test_block_decompose_example():
    dec = block_decompose([3.0, -1.0, 2.0, 0.5], 2)
    assert dec.M == 2
    assert [sorted(b.tolist()) for b in dec.blocks] == [[0, 2], [1, 3]]


def test_block_decompose_shapes():
    dec = block_decompose(np.arange(5.0), 2)
    assert dec.M == 3 and [len(b) for b in dec.blocks] == [2, 2, 1]
    whole = block_decompose(np.arange(5.0), 9)
    assert whole.M == 1 and sorted(whole.blocks[0].tolist()) == list(range(5))


def test_block_decompose_zero_vector_is_canonical():
    dec = block_decompose(np.zeros(5), 2)
    assert dec.perm.tolist() == list(range(5))
    assert np.all(dec.pnorms(np.zeros(5), 1.0) == 0.0)


def test_block_decompose_ties_break_by_index():
    dec = block_decompose([1.0, -1.0, 1.0, 1.0], 1)
    assert dec.perm.tolist() == [0, 1, 2, 3]


@pytest.mark.parametrize("bad", [[], np.zeros((2, 2))])
def test_block_decompose_rejects_bad_input(bad):
    with pytest.raises(DomainError):
        block_decompose(bad, 1)


def test_sparse_vector_has_empty_tail_blocks():
    x = np.zeros(10)
    x[[2, 7, 9]] = [4.0, -1.0, 0.5]
    assert np.all(block_decompose(x, 3).pnorms(x, 1.3)[1:] == 0.0)
    assert tail_block_norm(x, 3, 1.3, 0.5) == 0.0


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("m", [1, 2, 3])
def test_blocks_against_brute_force_sort(n, m):
    # exhaustive over sign/magnitude patterns from a small alphabet, including ties
    for vals in itertools.islice(itertools.product([0.0, 1.0, -2.0, 3.0], repeat=n), 200):
        x = np.array(vals)
        dec = block_decompose(x, m)
        oracle = sorted(range(n), key=lambda i: (-abs(x[i]), i))
        assert np.concatenate(dec.blocks).tolist() == oracle
        for a, b in zip(dec.blocks, dec.blocks[1:]):
            assert np.abs(x[a]).min() >= np.abs(x[b]).max()


@given(vectors, st.integers(1, 30), exponents)
def test_partition_identity(x, m, p):
    norms = block_pnorms(x, m, p)
    total = quasi_norm(x, p)
    if total == 0:
        assert np.all(norms == 0)
        return
    # compare after scaling so that p-th powers stay representable
    lhs = np.sum((norms / total) ** p)
    assert lhs == pytest.approx(1.0, rel=1e-10)


def test_block_pnorms_matches_decomposition(rng):
    X = rng.standard_normal((11, 6))
    batch = block_pnorms(X, 3, 1.7)
    for j in range(6):
        dec = block_decompose(X[:, j], 3)
        assert np.allclose(batch[:, j], dec.pnorms(X[:, j], 1.7), rtol=1e-13)


@pytest.mark.parametrize("x, I, expected", [
    ([3.0, -1.0, 2.0], [0, 1, 2], [3.0, -1.0, 2.0]),
    ([3.0, -1.0, 2.0], [], [0.0, 0.0, 0.0]),
    ([3.0, -1.0, 2.0], [1], [0.0, -1.0, 0.0]),
])
def test_restrict(x, I, expected):
    assert restrict(x, I).tolist() == expected


def test_restrict_out_of_range():
    with pytest.raises(DomainError):
        restrict([1.0, 2.0], [2])


def test_tail_bound_example():
    lhs, rhs = rearrangement_tail_bound([1.0, 1.0, 1.0, 1.0], 2, 2.0, 1.0, 1)
    assert lhs == pytest.approx(math.sqrt(2.0), rel=1e-14)
    assert rhs == pytest.approx(4.0 / math.sqrt(2.0), rel=1e-14)


def test_tail_bound_degenerate_cases():
    assert rearrangement_tail_bound([1.0, 0.0, 0.0, 0.0], 1, 2.0, 1.0, 2) == (0.0, 0.0)
    lhs, rhs = rearrangement_tail_bound([5.0, 0.0, -1.0, 0.0], 2, 1.5, 0.5, 1)
    assert lhs == 0.0 and rhs > 0
    # j beyond the last block
    lhs, rhs = rearrangement_tail_bound([1.0, 2.0, 3.0], 1, 1.0, 1.0, 7)
    assert lhs == 0.0 and rhs == 0.0


@given(vectors, st.integers(1, 8), st.floats(0.2, 3.0), st.floats(0.05, 1.0), st.integers(1, 6))
def test_tail_bound_holds(x, m, p, r, j):
    r = min(r, p)
    lhs, rhs = rearrangement_tail_bound(x, m, p, r, j)
    assert lhs <= rhs * (1 + 1e-9)


@given(vectors, small_r, st.integers(0, 2**32 - 1))
def test_r_triangle_inequality(x, r, seed):
    y = np.random.default_rng(seed).standard_normal(x.size) * 10
    lhs = quasi_norm(x + y, r)
    a, b = quasi_norm(x, r), quasi_norm(y, r)
    scale = max(lhs, a, b)
    if scale == 0:
        return
    assert (lhs / scale) ** r <= ((a / scale) ** r + (b / scale) ** r) * (1 + 1e-9)


@given(vectors, small_r)
def test_weak_norm_below_r_norm(x, r):
    assert weak_norm(x, r) <= quasi_norm(x, r) * (1 + 1e-9)


@given(vectors, exponents, st.floats(-1e3, 1e3))
def test_homogeneity(x, p, lam):
    # scaling must not push nonzero coordinates into the subnormal range
    nz = x[x != 0]
    assume(nz.size == 0 or np.abs(lam * nz).min() >= np.finfo(float).tiny)
    assert quasi_norm(lam * x, p) == pytest.approx(abs(lam) * quasi_norm(x, p), rel=1e-10,
                                                   abs=1e-300)


@given(vectors, exponents)
def test_zero_iff_zero_vector(x, p):
    assert (quasi_norm(x, p) == 0) == (not np.any(x))

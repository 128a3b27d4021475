import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypercensus import ffla
from hypercensus._jit import gf2_rank_words

SIZES = [2, 3, 4, 5, 7, 8, 9, 16, 25, 27, 32]


@pytest.mark.parametrize("q", SIZES)
def test_field_axioms(q):
    F = ffla.field_of_size(q)
    x = F.elements()
    for a in range(q):
        row = F.mul(np.full(q, a), x)
        if a:
            assert sorted(row.tolist()) == list(range(q))
            assert F.mul(a, F.inv(a)) == 1
        assert np.array_equal(F.add(np.full(q, a), F.neg(np.full(q, a))), np.zeros(q, dtype=np.int64))
    # characteristic and Frobenius additivity
    a, b = np.meshgrid(x, x)
    assert np.array_equal(F.frobenius(F.add(a, b)), F.add(F.frobenius(a), F.frobenius(b)))


@pytest.mark.parametrize("q", SIZES)
def test_distributivity(q):
    F = ffla.field_of_size(q)
    x = F.elements()
    for a in range(q):
        b, c = np.meshgrid(x, x)
        lhs = F.mul(np.full_like(b, a), F.add(b, c))
        rhs = F.add(F.mul(np.full_like(b, a), b), F.mul(np.full_like(c, a), c))
        assert np.array_equal(lhs, rhs)


def test_primitive_element_and_trace():
    F = ffla.field_of_size(16)
    assert max(F.order(a) for a in range(1, 16)) == 15
    tr = F.trace_table()
    assert set(tr.tolist()) == {0, 1}
    assert int(np.sum(tr)) == 8


def test_bad_sizes():
    with pytest.raises(ValueError):
        ffla.field_of_size(6)
    with pytest.raises(ValueError):
        ffla.make_field(4, 1)


@pytest.mark.parametrize("m,q,expected", [(1, 2, 1), (2, 2, 6), (3, 2, 168), (6, 2, 20158709760), (2, 3, 48)])
def test_gl_order(m, q, expected):
    assert ffla.gl_order(m, q) == expected


def _brute_gl_count(m, q):
    F = ffla.field_of_size(q)
    return sum(1 for entries in itertools.product(range(q), repeat=m * m)
               if ffla.is_invertible(np.array(entries).reshape(m, m), F))


@pytest.mark.parametrize("m,q", [(2, 2), (2, 3), (3, 2)])
def test_gl_order_brute(m, q):
    assert ffla.gl_order(m, q) == _brute_gl_count(m, q)


@pytest.mark.parametrize("m,q", [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (2, 4), (6, 2)])
def test_conjugacy_classes_partition_group(m, q):
    classes = ffla.conjugacy_classes(m, q)
    assert sum(c.size for c in classes) == ffla.gl_order(m, q)
    F = ffla.field_of_size(q)
    for c in classes:
        assert ffla.is_invertible(c.representative, F)


def test_conjugacy_class_count_gl6():
    # number of classes of GL_6(F_2)
    assert len(ffla.conjugacy_classes(6, 2)) == 60


def test_conjugacy_classes_match_brute_force():
    F = ffla.field_of_size(2)
    seen = {}
    mats = [np.array(e).reshape(3, 3) for e in itertools.product(range(2), repeat=9)]
    mats = [g for g in mats if ffla.is_invertible(g, F)]
    for c in ffla.conjugacy_classes(3, 2):
        rep = c.representative
        cls = {tuple(ffla.matmul(ffla.matmul(g, rep, F), ffla.inverse(g, F), F).ravel()) for g in mats}
        assert len(cls) == c.size
        for key in cls:
            assert key not in seen
            seen[key] = True
    assert len(seen) == 168


matrices = st.integers(1, 6).flatmap(
    lambda r: st.integers(1, 6).flatmap(
        lambda c: st.lists(st.lists(st.integers(0, 6), min_size=c, max_size=c), min_size=r, max_size=r)))


@settings(max_examples=60, deadline=None)
@given(matrices, st.sampled_from([2, 3, 4, 7]))
def test_rank_nullity_and_kernel(rows, q):
    F = ffla.field_of_size(q)
    m = np.array(rows, dtype=np.int64) % q
    rk = ffla.rank(m, F)
    ker = ffla.kernel(m, F)
    assert rk + ker.shape[0] == m.shape[1]
    for v in ker:
        assert not ffla.matvec(m, v, F).any()
    if ker.shape[0]:
        assert ffla.rank(ker, F) == ker.shape[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.sampled_from([2, 3, 4, 5]), st.integers(0, 2 ** 32 - 1))
def test_inverse_and_solve(n, q, seed):
    F = ffla.field_of_size(q)
    rng = np.random.default_rng(seed)
    g = ffla.random_invertible(n, F, rng)
    gi = ffla.inverse(g, F)
    assert np.array_equal(ffla.matmul(g, gi, F), ffla.identity(n))
    b = rng.integers(0, q, n)
    x = ffla.solve(g, b, F)
    assert np.array_equal(ffla.matvec(g, x, F), b)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 40), st.integers(1, 130), st.integers(0, 2 ** 32 - 1))
def test_gf2_rank_three_ways(nrows, ncols, seed):
    rng = np.random.default_rng(seed)
    dense = rng.integers(0, 2, (nrows, ncols))
    dense[rng.random(nrows) < 0.3] = 0
    expected = ffla.rank(dense, ffla.field_of_size(2))
    rows = [ffla.array_to_bits(r) for r in dense]
    assert ffla.gf2_rank(rows) == expected
    nwords = (ncols + 63) // 64
    words = np.zeros((nrows, nwords), dtype=np.uint64)
    for i, bits in enumerate(rows):
        for w in range(nwords):
            words[i, w] = (bits >> (64 * w)) & (2 ** 64 - 1)
    assert ffla.gf2_rank_packed(words, ncols) == expected
    assert gf2_rank_words(words.copy()) == expected


def test_identity_rank_and_kernel():
    F = ffla.field_of_size(2)
    assert ffla.rank(ffla.identity(6), F) == 6
    assert ffla.kernel(ffla.identity(6), F).shape[0] == 0


def test_singular_solve_returns_none():
    F = ffla.field_of_size(2)
    m = np.array([[1, 1], [1, 1]])
    assert ffla.solve(m, np.array([1, 0]), F) is None

import numpy as np
import pytest

from hypercensus import ffla, permgroup, symspace


@pytest.mark.parametrize("m,q", [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (2, 4), (6, 2)])
def test_gl_generators_give_full_order(m, q):
    F = ffla.field_of_size(q)
    gens = symspace.gl_generators(m, F)
    perms = [permgroup.matrix_to_perm(g, F) for g in gens]
    assert permgroup.group_order(perms, permgroup.degree(m, q)) == ffla.gl_order(m, q)


def test_perm_matrix_round_trip_and_homomorphism():
    F = ffla.field_of_size(3)
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = ffla.random_invertible(3, F, rng)
        h = ffla.random_invertible(3, F, rng)
        pg, ph = permgroup.matrix_to_perm(g, F), permgroup.matrix_to_perm(h, F)
        assert np.array_equal(permgroup.perm_to_matrix(pg, 3, F), g)
        pgh = permgroup.matrix_to_perm(ffla.matmul(g, h, F), F)
        # vector v goes to g v, so (gh) acts as h then g
        assert np.array_equal(pgh, pg[ph])
        assert permgroup.is_identity(pg[permgroup.perm_inverse(pg)])


def test_bsgs_membership_and_sifting():
    F = ffla.field_of_size(2)
    n = permgroup.degree(3, 2)
    # upper unitriangular group of order 8
    gens = [np.array([[1, 1, 0], [0, 1, 0], [0, 0, 1]]), np.array([[1, 0, 0], [0, 1, 1], [0, 0, 1]])]
    perms = [permgroup.matrix_to_perm(g, F) for g in gens]
    bs = permgroup.build_bsgs(perms, n)
    assert bs.order() == 8
    inside = permgroup.matrix_to_perm(np.array([[1, 1, 1], [0, 1, 1], [0, 0, 1]]), F)
    outside = permgroup.matrix_to_perm(np.array([[1, 0, 0], [1, 1, 0], [0, 0, 1]]), F)
    assert bs.contains(inside)
    assert not bs.contains(outside)
    assert len(list(bs.elements())) == 8


def test_randomized_build_with_known_order():
    F = ffla.field_of_size(2)
    gens = symspace.gl_generators(4, F)
    perms = [permgroup.matrix_to_perm(g, F) for g in gens]
    bs = permgroup.build_bsgs(perms, permgroup.degree(4, 2), order=ffla.gl_order(4, 2),
                              rng=np.random.default_rng(0))
    assert bs.order() == 20160
    rng = np.random.default_rng(1)
    for _ in range(10):
        assert bs.contains(permgroup.matrix_to_perm(ffla.random_invertible(4, F, rng), F))

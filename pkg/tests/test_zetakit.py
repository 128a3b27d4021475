from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from hypercensus import hypergeo, symspace, zetakit
from hypercensus.zetakit import PointCounts

from conftest import random_form

X1_WEIL2 = [-2, 16, -42, 0, 210, -336, -182, 1024, -660, -1120, 1820, 0, -1820, 1120, 660, -1024, 182, 336,
            -210, 0, 42, -16, 2]


def synthetic_counts(roots, kmax, q=2):
    """N_k for a cubic fourfold whose primitive Frobenius eigenvalues are q^2 * roots."""
    out = []
    for k in range(1, kmax + 1):
        base = sum(q ** (i * k) for i in range(5))
        out.append(base + int(round(sum((q * q * r) ** k for r in roots).real)))
    return out


def _random_cubic(rng, basis, field, singular_share=0.0):
    return random_form(basis, field, rng, sparsity=0.7 if rng.random() < singular_share else 0.0)


# ---------------------------------------------------------------- point counts

@pytest.mark.parametrize("k", [1, 2, 3])
def test_conic_count_matches_naive(F2, cubic_basis, k):
    rng = np.random.default_rng(100 + k)
    for _ in range(12):
        f = _random_cubic(rng, cubic_basis, F2, singular_share=0.4)
        assert zetakit.count_points_conic(f, k) == zetakit.count_points_naive(f, k)


def test_fermat_and_x1_small_counts(fermat, x1):
    assert [zetakit.count_points_conic(fermat, k) for k in (1, 2)] == [31, 693]
    assert [zetakit.count_points_conic(x1, k) for k in (1, 2, 3)] == [63, 693, 5193]


def test_cone_path(F2, cubic_basis):
    # the cubic does not involve x4, x5: every fiber is a plane or a cone point
    rng = np.random.default_rng(7)
    arr = np.zeros(cubic_basis.size, dtype=np.int64)
    for i, e in enumerate(cubic_basis.exps):
        if e[4] == e[5] == 0:
            arr[i] = rng.integers(0, 2)
    f = symspace.Form.from_array(cubic_basis, F2, arr)
    line = hypergeo.LinearSubvariety.from_rows(np.eye(6, dtype=np.int64)[4:], F2)
    fb = zetakit.conic_fibration(f, line=line)
    assert fb.cone
    for k in (1, 2, 3):
        assert zetakit.count_points_conic(f, k, fb) == zetakit.count_points_naive(f, k)


def test_direct_discriminant_path(F2, cubic_basis):
    rng = np.random.default_rng(13)
    for _ in range(4):
        f = _random_cubic(rng, cubic_basis, F2)
        fb = zetakit.conic_fibration(f, project=False)
        assert fb.direct or fb.cone
        for k in (1, 2):
            assert zetakit.count_points_conic(f, k, fb) == zetakit.count_points_naive(f, k)


def test_exceptional_divisor_correction(F2, cubic_basis):
    # |Bl(X)| = |X| - |line| + |E|, with E counted by the singular points on the line
    rng = np.random.default_rng(17)
    for _ in range(6):
        f = _random_cubic(rng, cubic_basis, F2, singular_share=0.5)
        fb = zetakit.conic_fibration(f)
        for k in (1, 2):
            q = 2 ** k
            e = (q + 1) * (1 + q + q * q) + fb.singular_on_line(k) * q ** 3
            naive = zetakit.count_points_naive(f, k)
            assert zetakit.blowup_points_naive(f, fb.line, k) == naive - (q + 1) + e


def test_chosen_line_lies_on_cubic(F2, cubic_basis):
    rng = np.random.default_rng(19)
    for _ in range(10):
        f = _random_cubic(rng, cubic_basis, F2)
        line = zetakit.choose_good_line(f)
        assert line in set(hypergeo.lines_on(f))


def test_naive_threshold(fermat):
    with pytest.raises(ValueError):
        zetakit.count_points_naive(fermat, 6, threshold=1000)


# ---------------------------------------------------------------- Weil polynomials

def test_synthetic_trivial_weil_polynomial():
    counts = [sum(2 ** (i * k) for i in range(5)) + 22 * 4 ** k for k in range(1, 12)]
    w = zetakit.weil_from_counts(counts)
    assert w.eps == 0
    expected = sympy.Poly((sympy.Symbol("t") - 1) ** 22).all_coeffs()[::-1]
    assert list(w.coeffs) == [Fraction(int(c)) for c in expected]
    qp = zetakit.q_polynomial(w)
    assert qp == [int(c) for c in sympy.Poly((1 - 4 * sympy.Symbol("s")) ** 22).all_coeffs()[::-1]]
    assert zetakit.newton_height(qp).height is None
    ranks = zetakit.cyclotomic_split(w.coeffs)
    assert ranks.m == ranks.n == 22


def test_power_sums_and_newton_identities():
    rng = np.random.default_rng(0)
    roots = [int(x) for x in rng.integers(-3, 4, 8)]
    p = [Fraction(sum(r ** k for r in roots)) for k in range(1, 9)]
    e = zetakit.elementary_from_power(p)
    t = sympy.Symbol("t")
    poly = sympy.Poly(sympy.prod([t - r for r in roots]), t).all_coeffs()
    for k in range(1, 9):
        assert e[k] == (-1) ** k * poly[k]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([1, -1]), min_size=22, max_size=22))
def test_roots_of_unity_round_trip(signs):
    # P = prod (t - s_i) with s_i = +-1, a legitimate Weil polynomial
    counts = synthetic_counts(signs, 13)
    w = zetakit.weil_from_counts(counts)
    t = sympy.Symbol("t")
    expected = sympy.Poly(sympy.prod([t - s for s in signs]), t).all_coeffs()[::-1]
    if w.eps is None:
        assert [Fraction(int(c)) for c in expected] in [list(c) for c in w.alternatives]
    else:
        assert list(w.coeffs) == [Fraction(int(c)) for c in expected]
        ranks = zetakit.cyclotomic_split(w.coeffs)
        assert ranks.m == signs.count(1)
        assert ranks.n == 22


def test_q_polynomial_round_trip(x1):
    z = zetakit.zeta(x1)
    qp = zetakit.q_polynomial(z.weil)
    assert zetakit.weil_from_q(qp, z.weil.eps) == tuple(z.weil.coeffs)


def test_functional_equation_typo_guard():
    counts = [sum(2 ** (i * k) for i in range(5)) + 22 * 4 ** k for k in range(1, 12)]
    counts[3] += 1  # break integrality
    with pytest.raises(ValueError):
        zetakit.weil_from_counts(counts)


def test_unit_circle_check():
    assert zetakit.roots_on_unit_circle([1, 0, 1])
    assert not zetakit.roots_on_unit_circle([2, 0, 1])
    assert zetakit.roots_on_unit_circle([1, -2, 1])


# ---------------------------------------------------------------- Newton polygons

def test_newton_slopes_basic():
    assert zetakit.newton_slopes([1, 2, 4]) == [1, 1]
    assert zetakit.newton_slopes([1, 1, 16]) == [0, 4]


def test_height_profiles():
    # ordinary: one unit root, one root of valuation 4, twenty of valuation 2
    s = sympy.Symbol("s")
    for h in (1, 2, 5, 10):
        q = sympy.Poly(sympy.expand((1 - 2 ** (2 * h - 1) * s ** h) * (1 - 2 ** (2 * h + 1) * s ** h)
                                    * (1 - 4 * s) ** (22 - 2 * h)), s)
        qc = [int(c) for c in q.all_coeffs()[::-1]]
        nd = zetakit.newton_height(qc)
        assert nd.height == h
        assert sorted(nd.slopes) == sorted(4 - x for x in nd.slopes)


@pytest.mark.parametrize("n,v", [(1, 0), (8, 3), (-12, 2), (3 * 2 ** 40, 40)])
def test_v2(n, v):
    assert zetakit.v2(n) == v


# ---------------------------------------------------------------- cyclotomic factors

@pytest.mark.parametrize("n", range(1, 40))
def test_cyclotomic_polynomials(n):
    x = sympy.Symbol("x")
    expected = [int(c) for c in sympy.Poly(sympy.cyclotomic_poly(n, x), x).all_coeffs()[::-1]]
    assert list(zetakit.cyclotomic(n)) == expected
    assert zetakit.euler_phi(n) == sympy.totient(n)


def test_cyclotomic_indices_complete():
    idx = set(zetakit.cyclotomic_indices(22))
    assert idx == {n for n in range(1, 2000) if sympy.totient(n) <= 22}


def test_split_product():
    t = sympy.Symbol("t")
    poly = sympy.expand((t - 1) ** 3 * (t + 1) * sympy.cyclotomic_poly(7, t) * (t ** 2 - sympy.Rational(1, 2) * t + 1))
    coeffs = [Fraction(str(c)) for c in sympy.Poly(poly, t).all_coeffs()[::-1]]
    r = zetakit.cyclotomic_split(coeffs)
    assert r.m == 3 and r.n == 10
    assert dict(r.factors) == {1: 3, 2: 1, 7: 1}
    assert len(r.noncyc) == 3


def test_k3_part():
    coeffs = [Fraction(c) for c in (-1, 2, -2, 1)]  # (t - 1)(t^2 - t + 1)
    assert zetakit.k3_part(coeffs) == (1, -1, 1)
    assert zetakit.k3_part([Fraction(1), Fraction(0), Fraction(1)]) is None


# ---------------------------------------------------------------- lines from point counts

def test_galkin_shinder_known(x1, fermat):
    assert zetakit.galkin_shinder_lines(63, 693) == 315
    assert zetakit.galkin_shinder_lines(31, 693) == len(hypergeo.lines_on(fermat)) == 75


def test_galkin_shinder_random(F2, cubic_basis):
    rng = np.random.default_rng(23)
    for _ in range(15):
        f = _random_cubic(rng, cubic_basis, F2, singular_share=0.5)
        n1, n2 = (zetakit.count_points_naive(f, k) for k in (1, 2))
        sing = len(hypergeo.singular_points(f, 1))
        assert zetakit.galkin_shinder_lines(n1, n2, sing) == len(hypergeo.lines_on(f))


def test_galkin_shinder_rejects_inconsistent_counts():
    with pytest.raises(ValueError):
        zetakit.galkin_shinder_lines(64, 693)


# ---------------------------------------------------------------- full pipeline

def test_x1_record(x1):
    rec = zetakit.zeta(x1).record()
    assert rec["counts"][:3] == [63, 693, 5193]
    assert rec["eps"] == 1
    assert rec["weil2"] == X1_WEIL2
    assert rec["height"] == "inf"
    assert rec["rk_alg"] == 16 and rec["rk_geom"] == 23


def test_fermat_is_supersingular(fermat):
    z = zetakit.zeta(fermat)
    assert z.newton.height is None
    assert z.ranks.geometric_rank == 23


def test_random_smooth_cubics_satisfy_weil_invariants(F2, cubic_basis):
    rng = np.random.default_rng(29)
    done = 0
    while done < 4:
        f = random_form(cubic_basis, F2, rng)
        if not hypergeo.is_smooth(f):
            continue
        done += 1
        z = zetakit.zeta(f)
        cands = [z.weil.coeffs] if z.weil.eps is not None else list(z.weil.alternatives)
        for c in cands:
            assert len(c) == 23 and c[-1] == 1
            assert all((2 * x).denominator == 1 for x in c)
            assert zetakit.roots_on_unit_circle(c)
            assert zetakit.is_square(int(2 * zetakit.poly_eval(c, Fraction(-1))))
        if z.weil.eps is not None:
            sign = -1 if z.weil.eps else 1
            assert all(z.weil.coeffs[22 - i] == sign * z.weil.coeffs[i] for i in range(23))
            assert z.ranks.m <= z.ranks.n <= 22 and z.ranks.n % 2 == 0
            if z.newton.height is None:
                assert z.ranks.n == 22


def test_point_counts_fetch_lazily():
    calls = []
    pc = PointCounts(2, [1, 2], lambda k: calls.append(k) or k * 10)
    assert pc.get(2) == 2 and not calls
    assert pc.get(4) == 40 and calls == [3, 4]


AMBIGUOUS_COUNTS = [33, 377, 4881, 69921, 1086273, 17048705, 270570753, 4312056321, 68853969921,
                    1100589746177, 17600789368833, 281543722016769, 4504149718679553]


def test_square_condition_decides_sign():
    # a smooth cubic whose counts through F_{2^13} leave both signs on the unit circle
    w = zetakit.weil_from_counts(AMBIGUOUS_COUNTS)
    assert w.eps is None and w.resolution == "ambiguous"
    values = [int(2 * zetakit.poly_eval(c, Fraction(-1))) for c in w.alternatives]
    assert values == [8, 0]
    w = zetakit.weil_from_counts(AMBIGUOUS_COUNTS, square_test=True)
    assert w.eps == 1 and w.resolution == "square"
    assert list(w.coeffs) == list(zetakit.weil_from_counts(AMBIGUOUS_COUNTS).alternatives[1])
    w = zetakit.weil_from_counts(AMBIGUOUS_COUNTS[:11], square_test=True, unit_circle_first=True)
    assert w.eps == 1 and w.used == tuple(range(1, 12))

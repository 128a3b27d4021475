"""Geometry of hypersurfaces given by coefficient vectors.

Partial derivatives in characteristic p, smoothness, singular points, linear
subvarieties contained in a hypersurface, and the characteristic-2 point count
of a plane conic.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from . import ffla, symspace
from ._jit import gf2_rank_words
from .ffla import FieldDesc
from .symspace import Form

POINT_THRESHOLD = 1 << 26


# ---------------------------------------------------------------------------
# derivatives and smoothness

def partials(f: Form) -> list[Form]:
    """Formal partial derivatives, coefficients reduced mod p."""
    basis, field = f.basis, f.field
    if basis.d == 0:
        return [Form.zero(basis, field)] * basis.m
    lower = symspace.monomials(basis.m, basis.d - 1)
    out = []
    for i in range(basis.m):
        coeffs = np.zeros(lower.size, dtype=np.int64)
        for c, e in zip(f.coeffs, basis.exps):
            if c and e[i]:
                k = e[i] % field.p
                if k:
                    ee = list(e)
                    ee[i] -= 1
                    j = lower.index[tuple(ee)]
                    coeffs[j] = field.add(int(coeffs[j]), field.mul(c, field.prime_subfield_element(k)))
        out.append(Form.from_array(lower, field, coeffs))
    return out


@functools.lru_cache(maxsize=None)
def _product_table(m: int, da: int, db: int) -> np.ndarray:
    """``table[a, b]`` = index of (monomial a of degree da)*(monomial b of degree db)."""
    ba, bb, bc = symspace.monomials(m, da), symspace.monomials(m, db), symspace.monomials(m, da + db)
    ea = np.array(ba.exps, dtype=np.int64).reshape(ba.size, m)
    eb = np.array(bb.exps, dtype=np.int64).reshape(bb.size, m)
    table = np.empty((ba.size, bb.size), dtype=np.int64)
    for i in range(ba.size):
        for j in range(bb.size):
            table[i, j] = bc.index[tuple(int(x) for x in ea[i] + eb[j])]
    return table


def smoothness_degree(m: int, d: int, p: int) -> int:
    """Degree at which the Jacobian ideal fills the whole graded piece iff smooth."""
    if d % p:
        return m * (d - 2) + 1          # partials alone (Euler puts f in their ideal)
    return m * (d - 2) + 2              # f together with its partials


def macaulay_rank(generators: list[Form], e: int) -> tuple[int, int]:
    """(rank, number of columns) of the degree-e Macaulay matrix."""
    field = generators[0].field
    m = generators[0].basis.m
    ncols = symspace.monomials(m, e).size
    blocks = []
    for g in generators:
        dg = g.basis.d
        if dg > e or g.is_zero():
            continue
        mult = symspace.monomials(m, e - dg).size
        table = _product_table(m, e - dg, dg)
        block = np.zeros((mult, ncols), dtype=np.int64)
        rows = np.arange(mult)[:, None]
        nz = np.flatnonzero(g.array())
        block[rows, table[:, nz]] = g.array()[nz][None, :]
        blocks.append(block)
    if not blocks:
        return 0, ncols
    mat = np.concatenate(blocks)
    if field.q == 2:
        return _gf2_rank_dense(mat), ncols
    return ffla.rank(mat, field), ncols


def _gf2_rank_dense(mat: np.ndarray) -> int:
    bits = np.packbits(mat.astype(np.uint8), axis=1, bitorder="little")
    pad = (-bits.shape[1]) % 8
    if pad:
        bits = np.concatenate([bits, np.zeros((bits.shape[0], pad), dtype=np.uint8)], axis=1)
    words = np.ascontiguousarray(bits).view(np.uint64).copy()
    return int(gf2_rank_words(words))


def is_smooth(f: Form) -> bool:
    """True iff f = 0 has no singular point over the algebraic closure."""
    if f.is_zero():
        return False
    m, d, p = f.m, f.d, f.field.p
    if d == 1:
        return True
    gens = partials(f)
    if d % p == 0:
        gens = [f] + gens
    e = smoothness_degree(m, d, p)
    rk, ncols = macaulay_rank(gens, e)
    return rk == ncols


# ---------------------------------------------------------------------------
# points

def extension(field: FieldDesc, k: int) -> FieldDesc:
    if k == 1:
        return field
    if field.e != 1:
        raise NotImplementedError("extensions are supported over prime fields only")
    return ffla.make_field(field.p, k)


def projective_point_count(m: int, q: int) -> int:
    return (q ** m - 1) // (q - 1)


def projective_points(m: int, field: FieldDesc, chunk: int = 1 << 18):
    """Yield arrays of normalized representatives (first nonzero coordinate 1)."""
    q = field.q
    for pivot in range(m):
        free = m - pivot - 1
        total = q ** free
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
            pts = np.zeros((idx.size, m), dtype=np.int64)
            pts[:, pivot] = 1
            for j in range(pivot + 1, m):
                pts[:, j] = idx % q
                idx = idx // q
            yield pts


def evaluate(f: Form, points: np.ndarray, field: FieldDesc | None = None) -> np.ndarray:
    """Values of f at rows of ``points`` (coordinates in ``field``, which contains f's field)."""
    field = field or f.field
    points = np.asarray(points, dtype=np.int64)
    n, m = points.shape
    powers = [[np.ones(n, dtype=np.int64)] for _ in range(m)]
    for j in range(m):
        for e in range(1, f.d + 1):
            powers[j].append(field.mul(powers[j][-1], points[:, j]))
    out = np.zeros(n, dtype=np.int64)
    for c, e in zip(f.coeffs, f.basis.exps):
        if not c:
            continue
        term = np.full(n, c, dtype=np.int64)
        for j, k in enumerate(e):
            if k:
                term = field.mul(term, powers[j][k])
        out = field.add(out, term)
    return out


def singular_points(f: Form, k: int = 1) -> np.ndarray:
    """All points of P^{m-1}(F_{q^k}) where f and every partial vanish."""
    ext = extension(f.field, k)
    if projective_point_count(f.m, ext.q) > POINT_THRESHOLD:
        raise ValueError("too many points to search")
    gens = [f] + [g for g in partials(f) if not g.is_zero()]
    found = []
    for pts in projective_points(f.m, ext):
        mask = np.ones(len(pts), dtype=bool)
        for g in gens:
            mask &= evaluate(g, pts, ext) == 0
            if not mask.any():
                break
        found.append(pts[mask])
    return np.concatenate(found) if found else np.zeros((0, f.m), dtype=np.int64)


# ---------------------------------------------------------------------------
# linear subvarieties

@dataclass(frozen=True)
class LinearSubvariety:
    """Projectivization of a subspace of F_q^m, stored by its echelon basis."""

    m: int
    q: int
    rows: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.rows) - 1

    @property
    def basis(self) -> np.ndarray:
        return np.array(self.rows, dtype=np.int64).reshape(len(self.rows), self.m)

    @classmethod
    def from_rows(cls, rows, field: FieldDesc) -> "LinearSubvariety":
        rows = np.asarray(rows, dtype=np.int64)
        r, rk, _ = ffla.rref(rows, field)
        return cls(rows.shape[1], field.q, tuple(tuple(int(x) for x in row) for row in r[:rk]))

    def __str__(self) -> str:
        return "<" + ", ".join("(" + " ".join(map(str, r)) + ")" for r in self.rows) + ">"


def subspaces(m: int, k: int, field: FieldDesc):
    """Every k-dimensional subspace of F_q^m as an echelon k x m array."""
    q = field.q
    for pivots in itertools.combinations(range(m), k):
        slots = [(i, c) for i, p in enumerate(pivots) for c in range(p + 1, m) if c not in pivots]
        for vals in itertools.product(range(q), repeat=len(slots)):
            a = np.zeros((k, m), dtype=np.int64)
            for i, p in enumerate(pivots):
                a[i, p] = 1
            for (i, c), v in zip(slots, vals):
                a[i, c] = v
            yield a


def lines_in_projective_space(m: int, q: int):
    field = ffla.field_of_size(q)
    for a in subspaces(m, 2, field):
        yield LinearSubvariety(m, q, tuple(tuple(int(x) for x in r) for r in a))


def planes_in_projective_space(m: int, q: int):
    field = ffla.field_of_size(q)
    for a in subspaces(m, 3, field):
        yield LinearSubvariety(m, q, tuple(tuple(int(x) for x in r) for r in a))


def gaussian_binomial(n: int, k: int, q: int) -> int:
    num = den = 1
    for i in range(k):
        num *= q ** (n - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def parametrization(rows: np.ndarray, m: int) -> np.ndarray:
    """m x m matrix g with ``g x = sum_j x_j rows[j]`` (remaining columns zero)."""
    g = np.zeros((m, m), dtype=np.int64)
    g[:, :len(rows)] = np.asarray(rows).T
    return g


def restriction(f: Form, sub: LinearSubvariety) -> Form:
    """f restricted to the subvariety, as a form in dim+1 variables."""
    k = len(sub.rows)
    g = parametrization(sub.basis, f.m)
    full = symspace.substitute(f, g)
    small = symspace.monomials(k, f.d)
    coeffs = [full.coeffs[f.basis.index[e + (0,) * (f.m - k)]] for e in small.exps]
    return Form(small, f.field, tuple(coeffs))


@functools.lru_cache(maxsize=None)
def _containment_tables(m: int, d: int, q: int, k: int):
    """Stacked restriction maps for every (k-1)-plane of P^{m-1}(F_q)."""
    field = ffla.field_of_size(q)
    basis = symspace.monomials(m, d)
    small = symspace.monomials(k, d)
    sel = [basis.index[e + (0,) * (m - k)] for e in small.exps]
    subs = list(subspaces(m, k, field))
    mats = np.empty((len(subs), len(sel), basis.size), dtype=np.int64)
    for i, a in enumerate(subs):
        s = symspace.sym_matrix(parametrization(a, m), basis, field)
        mats[i] = s[sel]
    mats.setflags(write=False)
    return subs, mats


def _contained(f: Form, k: int) -> list[LinearSubvariety]:
    subs, mats = _containment_tables(f.m, f.d, f.field.q, k)
    field = f.field
    if field.e == 1:
        vals = (mats @ f.array()) % field.p
    else:
        vals = np.zeros(mats.shape[:2], dtype=np.int64)
        for j, c in enumerate(f.coeffs):
            if c:
                vals = field.add(vals, field.mul(mats[:, :, j], c))
    hit = np.flatnonzero(~vals.any(axis=1))
    return [LinearSubvariety(f.m, field.q, tuple(tuple(int(x) for x in r) for r in subs[i])) for i in hit]


def lines_on(f: Form) -> list[LinearSubvariety]:
    """Lines of P^{m-1} defined over F_q lying on f = 0 (as schemes)."""
    return _contained(f, 2)


def planes_on(f: Form) -> list[LinearSubvariety]:
    return _contained(f, 3)


def disjoint_plane_pairs(planes) -> int:
    """Unordered pairs of planes whose spans together fill the ambient space."""
    planes = list(planes)
    if not planes:
        return 0
    m = planes[0].m
    if planes[0].q != 2:
        field = ffla.field_of_size(planes[0].q)
        return sum(1 for a, b in itertools.combinations(planes, 2)
                   if ffla.rank(np.concatenate([a.basis, b.basis]), field) == m)
    rows = [[ffla.array_to_bits(r) for r in p.rows] for p in planes]
    count = 0
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if ffla.gf2_rank(rows[i] + rows[j]) == m:
                count += 1
    return count


# ---------------------------------------------------------------------------
# conic fibration over a line

@dataclass(frozen=True)
class ConicData:
    """f = A y4^2 + B y4 y5 + C y5^2 + D y4 + E y5 + F with A..F forms in y0..y3."""

    A: Form
    B: Form
    C: Form
    D: Form
    E: Form
    F: Form

    def forms(self) -> tuple[Form, ...]:
        return (self.A, self.B, self.C, self.D, self.E, self.F)


def conic_data(f: Form) -> ConicData:
    """Split a cubic in six variables that contains the line Z(y0..y3)."""
    if f.m != 6 or f.d != 3:
        raise ValueError("expected a cubic form in six variables")
    field = f.field
    parts = {key: {} for key in "ABCDEF"}
    for c, e in zip(f.coeffs, f.basis.exps):
        if not c:
            continue
        a4, a5 = e[4], e[5]
        rest = e[:4]
        key = {(2, 0): "A", (1, 1): "B", (0, 2): "C", (1, 0): "D", (0, 1): "E", (0, 0): "F"}.get((a4, a5))
        if key is None:
            raise ValueError("the form does not contain the line Z(y0, y1, y2, y3)")
        parts[key][rest] = c
    degs = dict(A=1, B=1, C=1, D=2, E=2, F=3)
    out = {}
    for key, terms in parts.items():
        b = symspace.monomials(4, degs[key])
        coeffs = [terms.get(e, 0) for e in b.exps]
        out[key] = Form(b, field, tuple(coeffs))
    return ConicData(**out)


def discriminant(conic: ConicData) -> Form:
    """A E^2 + B^2 F + C D^2 + B D E (characteristic 2)."""
    field = conic.A.field
    b5 = symspace.monomials(4, 5)
    total = np.zeros(b5.size, dtype=np.int64)
    for x, y, z in ((conic.A, conic.E, conic.E), (conic.B, conic.B, conic.F),
                    (conic.C, conic.D, conic.D), (conic.B, conic.D, conic.E)):
        total = field.add(total, form_product([x, y, z]).array())
    return Form.from_array(b5, field, total)


def form_product(forms: list[Form]) -> Form:
    field = forms[0].field
    m = forms[0].m
    cur = forms[0]
    for g in forms[1:]:
        b = symspace.monomials(m, cur.d + g.d)
        out = np.zeros(b.size, dtype=np.int64)
        table = _product_table(m, cur.d, g.d)
        for i, c in enumerate(cur.coeffs):
            if c:
                for j, e in enumerate(g.coeffs):
                    if e:
                        k = table[i, j]
                        out[k] = field.add(int(out[k]), field.mul(c, e))
        cur = Form.from_array(b, field, out)
    return cur


def classify_conic(a: int, b: int, c: int, d: int, e: int, f: int, field: FieldDesc) -> int:
    """F_Q-points of A X^2 + B XY + C Y^2 + D XT + E YT + F T^2 = 0 in P^2 (char 2)."""
    q = field.q
    if field.p != 2:
        raise ValueError("the conic table is for characteristic 2")
    mul = field.mul
    disc = mul(a, mul(e, e)) ^ mul(mul(b, b), f) ^ mul(c, mul(d, d)) ^ mul(b, mul(d, e))
    if disc:
        return q + 1
    if b == 0 and d == 0 and e == 0:
        if a == 0 and c == 0 and f == 0:
            return q * q + q + 1
        return q + 1
    tr = _trace(field)
    if b:
        t = tr[field.div(mul(a, c), mul(b, b))]
    elif d:
        t = tr[field.div(mul(a, f), mul(d, d))]
    else:
        t = tr[field.div(mul(c, f), mul(e, e))]
    return 2 * q + 1 if t == 0 else 1


@functools.lru_cache(maxsize=None)
def _trace(field: FieldDesc) -> np.ndarray:
    return field.trace_table()


def conic_fiber_points(conic: ConicData, y, field: FieldDesc | None = None) -> int:
    """Point count of the fiber conic over y in P^3 (coordinates in ``field``)."""
    field = field or conic.A.field
    pt = np.asarray(y, dtype=np.int64)[None, :]
    vals = [int(evaluate(g, pt, field)[0]) for g in conic.forms()]
    return classify_conic(*vals, field)


def conic_points_bruteforce(a: int, b: int, c: int, d: int, e: int, f: int, field: FieldDesc) -> int:
    pts = np.concatenate(list(projective_points(3, field)))
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    mul, add = field.mul, field.add
    val = add(add(add(mul(a, mul(x, x)), mul(b, mul(x, y))), add(mul(c, mul(y, y)), mul(d, mul(x, t)))),
              add(mul(e, mul(y, t)), mul(f, mul(t, t))))
    return int(np.count_nonzero(val == 0))

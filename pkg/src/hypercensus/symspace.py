"""The GL_m(F_q)-module Sym^d(F_q^m) of degree-d forms in m variables.

Action convention: ``act(g, f)(x) = f(g x)`` with ``x`` a column vector, i.e. the
substitution ``x_i -> sum_k g[i, k] x_k``.  This is a right action,
``act(g @ h, f) == act(h, act(g, f))``, and the induced matrices satisfy
``sym_matrix(g @ h) == sym_matrix(h) @ sym_matrix(g)``.

Monomials are ordered graded reverse-lexicographically, largest first
(``x0^d`` comes first, ``x_{m-1}^d`` last).  The order is part of every file
format in this package and must not change.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass

import numpy as np

from . import ffla
from .ffla import FieldDesc


# ---------------------------------------------------------------------------
# monomials

class MonomialBasis:
    def __init__(self, m: int, d: int):
        if m < 1 or d < 0:
            raise ValueError("need m >= 1 and d >= 0")
        self.m = m
        self.d = d
        exps = [e for e in _compositions(d, m)]
        exps.sort(key=lambda a: tuple(-x for x in reversed(a)), reverse=True)
        self.exps: tuple[tuple[int, ...], ...] = tuple(exps)
        self.index: dict[tuple[int, ...], int] = {e: i for i, e in enumerate(self.exps)}
        self.size = len(self.exps)

    def __repr__(self) -> str:
        return f"MonomialBasis(m={self.m}, d={self.d})"

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, MonomialBasis) and (self.m, self.d) == (other.m, other.d)

    def __hash__(self) -> int:
        return hash((self.m, self.d))

    def __reduce__(self):
        return (monomials, (self.m, self.d))

    def monomial_str(self, i: int) -> str:
        parts = []
        for var, k in enumerate(self.exps[i]):
            if k == 1:
                parts.append(f"x{var}")
            elif k > 1:
                parts.append(f"x{var}^{k}")
        return "*".join(parts) if parts else "1"


def _compositions(d: int, m: int):
    if m == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _compositions(d - first, m - 1):
            yield (first,) + rest


@functools.lru_cache(maxsize=None)
def monomials(m: int, d: int) -> MonomialBasis:
    """The cached monomial basis of Sym^d in m variables."""
    return MonomialBasis(m, d)


@functools.lru_cache(maxsize=None)
def _shift_tables(m: int, d: int) -> np.ndarray:
    """``table[k, j]`` = index in degree d of (monomial j of degree d-1) * x_k."""
    lo = monomials(m, d - 1)
    hi = monomials(m, d)
    table = np.zeros((m, lo.size), dtype=np.int64)
    for j, e in enumerate(lo.exps):
        for k in range(m):
            ee = list(e)
            ee[k] += 1
            table[k, j] = hi.index[tuple(ee)]
    return table


@functools.lru_cache(maxsize=None)
def _parent_data(m: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """For each degree-d monomial: its first variable and the index of mono / x_var."""
    hi = monomials(m, d)
    lo = monomials(m, d - 1)
    var = np.zeros(hi.size, dtype=np.int64)
    par = np.zeros(hi.size, dtype=np.int64)
    for i, e in enumerate(hi.exps):
        k = next(j for j, x in enumerate(e) if x)
        ee = list(e)
        ee[k] -= 1
        var[i] = k
        par[i] = lo.index[tuple(ee)]
    return var, par


def multiply_by_linear(coeffs: np.ndarray, lin: np.ndarray, m: int, deg: int, field: FieldDesc) -> np.ndarray:
    """Coefficients of (form of degree ``deg``) * (linear form) in degree ``deg + 1``."""
    table = _shift_tables(m, deg + 1)
    out = np.zeros(monomials(m, deg + 1).size, dtype=np.int64)
    for k in range(m):
        c = int(lin[k])
        if c:
            out[table[k]] = field.add(out[table[k]], field.mul(coeffs, c))
    return out


# ---------------------------------------------------------------------------
# forms

@dataclass(frozen=True)
class Form:
    """A homogeneous form: coefficient vector in the fixed monomial order."""

    basis: MonomialBasis
    field: FieldDesc
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficients, got {len(self.coeffs)}")

    @classmethod
    def from_array(cls, basis: MonomialBasis, field: FieldDesc, arr) -> "Form":
        return cls(basis, field, tuple(int(x) for x in np.asarray(arr).reshape(-1)))

    @classmethod
    def from_bits(cls, basis: MonomialBasis, bits: int) -> "Form":
        return cls(basis, ffla.make_field(2), tuple((bits >> i) & 1 for i in range(basis.size)))

    @classmethod
    def zero(cls, basis: MonomialBasis, field: FieldDesc) -> "Form":
        return cls(basis, field, (0,) * basis.size)

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def d(self) -> int:
        return self.basis.d

    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=np.int64)

    def bits(self) -> int:
        if self.field.q != 2:
            raise ValueError("bit packing is only defined over F_2")
        return ffla.array_to_bits(self.coeffs)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __add__(self, other: "Form") -> "Form":
        return Form.from_array(self.basis, self.field, self.field.add(self.array(), other.array()))

    def __str__(self) -> str:
        return format_poly(self)

    def coeff_string(self) -> str:
        return format_coeff_string(self)


def format_poly(f: Form) -> str:
    terms = []
    for i, c in enumerate(f.coeffs):
        if c:
            mono = f.basis.monomial_str(i)
            terms.append(mono if c == 1 else f"{c}*{mono}")
    return " + ".join(terms) if terms else "0"


def format_coeff_string(f: Form) -> str:
    if f.field.q <= 10:
        return "".join(str(c) for c in f.coeffs)
    return ",".join(str(c) for c in f.coeffs)


_TERM = re.compile(r"^(?:(\d+)\*)?(.*)$")


def parse_poly(text: str, basis: MonomialBasis, field: FieldDesc) -> Form:
    """Parse ``"x0^2*x3 + x1*x4^2"``; integer coefficients are field encodings."""
    coeffs = np.zeros(basis.size, dtype=np.int64)
    text = text.strip()
    if text in ("", "0"):
        return Form.zero(basis, field)
    for sign, term in re.findall(r"([+-]?)\s*([^+-]+)", text):
        term = term.strip().replace(" ", "")
        if not term:
            continue
        m = _TERM.match(term)
        c = int(m.group(1)) % field.q if m.group(1) else 1
        if sign == "-":
            c = field.neg(c)
        exps = [0] * basis.m
        for factor in m.group(2).split("*"):
            if not factor:
                continue
            mm = re.fullmatch(r"x(\d+)(?:\^(\d+))?", factor)
            if mm is None:
                if factor.isdigit():
                    c = field.mul(c % field.q, int(factor) % field.q)
                    continue
                raise ValueError(f"cannot parse factor {factor!r}")
            var = int(mm.group(1))
            if var >= basis.m:
                raise ValueError(f"variable x{var} out of range for {basis.m} variables")
            exps[var] += int(mm.group(2) or 1)
        key = tuple(exps)
        if key not in basis.index:
            raise ValueError(f"term {term!r} does not have degree {basis.d}")
        i = basis.index[key]
        coeffs[i] = field.add(int(coeffs[i]), c % field.q)
    return Form.from_array(basis, field, coeffs)


def parse_coeff_string(text: str, basis: MonomialBasis, field: FieldDesc) -> Form:
    text = text.strip()
    if "," in text:
        vals = [int(t) for t in text.split(",")]
    else:
        vals = [int(ch) for ch in text]
    if len(vals) != basis.size:
        raise ValueError(f"expected {basis.size} coefficients, got {len(vals)}")
    if any(not 0 <= v < field.q for v in vals):
        raise ValueError("coefficient outside the field")
    return Form(basis, field, tuple(vals))


def parse_form(text: str, basis: MonomialBasis, field: FieldDesc) -> Form:
    """Accept either text form: a coefficient string or a polynomial."""
    t = text.strip()
    if "x" in t:
        return parse_poly(t, basis, field)
    return parse_coeff_string(t, basis, field)


# ---------------------------------------------------------------------------
# the action

def _images(g: np.ndarray, m: int, d: int, field: FieldDesc) -> np.ndarray:
    """Row j = coefficient vector of act(g, monomial_j)."""
    g = np.asarray(g, dtype=np.int64)
    prev = np.ones((1, 1), dtype=np.int64)
    for e in range(1, d + 1):
        n_e = monomials(m, e).size
        var, par = _parent_data(m, e)
        table = _shift_tables(m, e)
        cur = np.zeros((n_e, n_e), dtype=np.int64)
        src = prev[par]
        for k in range(m):
            coef = g[var, k]
            if not coef.any():
                continue
            if field.q == 2:
                cur[:, table[k]] ^= src & coef[:, None]
            else:
                cur[:, table[k]] = field.add(cur[:, table[k]], field.mul(src, coef[:, None]))
        prev = cur
    return prev


def sym_matrix(g: np.ndarray, basis: MonomialBasis, field: FieldDesc) -> np.ndarray:
    """Matrix of ``act(g, .)`` on coefficient column vectors."""
    g = np.asarray(g, dtype=np.int64)
    if g.shape != (basis.m, basis.m):
        raise ValueError(f"expected a {basis.m}x{basis.m} matrix")
    if basis.d == 0:
        return np.ones((1, 1), dtype=np.int64)
    return np.ascontiguousarray(_images(g, basis.m, basis.d, field).T)


def act(g: np.ndarray, f: Form, check: bool = True) -> Form:
    """Apply the substitution ``x -> g x`` to ``f``."""
    if check and not ffla.is_invertible(g, f.field):
        raise ValueError("group element is singular")
    s = sym_matrix(g, f.basis, f.field)
    return Form.from_array(f.basis, f.field, ffla.matvec(s, f.array(), f.field))


def substitute(f: Form, g: np.ndarray) -> Form:
    """``f(g x)`` for an arbitrary (possibly singular) square matrix ``g``."""
    return act(g, f, check=False)


def evaluate_naive(f: Form, point, field: FieldDesc) -> int:
    """Evaluate ``f`` at a point with coordinates in ``field`` (a superfield of f's)."""
    total = 0
    for c, e in zip(f.coeffs, f.basis.exps):
        if c:
            term = c
            for x, k in zip(point, e):
                if k:
                    term = field.mul(term, field.pow(int(x), k))
            total = field.add(total, term)
    return total


# ---------------------------------------------------------------------------
# subspaces and quotients

class Subspace:
    """Row space in canonical reduced echelon form."""

    def __init__(self, n: int, field: FieldDesc, rows=()):
        self.n = n
        self.field = field
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, n)
        if field.q == 2:
            bits, pivots = ffla.gf2_rref_rows([ffla.array_to_bits(r) for r in rows])
            self._bits = bits
            self.basis = np.array([ffla.bits_to_array(b, n) for b in bits], dtype=np.int64).reshape(-1, n)
        else:
            r, rk, pivots = ffla.rref(rows, field) if len(rows) else (rows, 0, [])
            self.basis = np.asarray(r[:rk], dtype=np.int64).reshape(-1, n)
            self._bits = None
        self.pivots = list(pivots)

    @classmethod
    def full(cls, n: int, field: FieldDesc) -> "Subspace":
        return cls(n, field, ffla.identity(n))

    @property
    def dim(self) -> int:
        return len(self.pivots)

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim} in {self.n})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, Subspace) and self.n == other.n and self.field == other.field
                and self.pivots == other.pivots and np.array_equal(self.basis, other.basis))

    def __hash__(self) -> int:
        return hash((self.n, tuple(self.pivots), self.basis.tobytes()))

    def reduce(self, v) -> np.ndarray:
        v = np.array(v, dtype=np.int64).reshape(-1)
        if self.field.q == 2:
            return ffla.bits_to_array(ffla.gf2_reduce(ffla.array_to_bits(v), self._bits, self.pivots), self.n)
        for row, pc in zip(self.basis, self.pivots):
            c = int(v[pc])
            if c:
                v = self.field.sub(v, self.field.mul(row, c))
        return v

    def reduce_bits(self, v: int) -> int:
        return ffla.gf2_reduce(v, self._bits, self.pivots)

    @property
    def bit_rows(self) -> list[int]:
        if self._bits is None:
            raise ValueError("bit rows exist only over F_2")
        return list(self._bits)

    def contains(self, v) -> bool:
        return not self.reduce(v).any()

    def contains_subspace(self, other: "Subspace") -> bool:
        return all(self.contains(r) for r in other.basis)

    def sum(self, other: "Subspace") -> "Subspace":
        return Subspace(self.n, self.field, np.concatenate([self.basis, other.basis]))

    def intersection(self, other: "Subspace") -> "Subspace":
        # x = a A = b B  <=>  (a, b) in kernel of [A; -B]^T
        if self.dim == 0 or other.dim == 0:
            return Subspace(self.n, self.field)
        stacked = np.concatenate([self.basis, self.field.neg(other.basis)])
        ker = ffla.kernel(stacked.T, self.field)
        if len(ker) == 0:
            return Subspace(self.n, self.field)
        coeffs = ker[:, :self.dim]
        return Subspace(self.n, self.field, ffla.matmul(coeffs, self.basis, self.field))

    def annihilator(self) -> "Subspace":
        if self.dim == 0:
            return Subspace.full(self.n, self.field)
        return Subspace(self.n, self.field, ffla.kernel(self.basis, self.field))


class QuotientMap:
    """Projection ``V -> V/W`` with the echelon-canonical section.

    Quotient coordinates are the non-pivot coordinates of the vector reduced
    modulo ``W``; the section puts them back with zeros in the pivot columns.
    """

    def __init__(self, kernel: Subspace):
        self.kernel = kernel
        piv = set(kernel.pivots)
        self.free = [c for c in range(kernel.n) if c not in piv]
        self.dim = len(self.free)
        n = kernel.n
        self.section_matrix = np.zeros((n, self.dim), dtype=np.int64)
        for j, c in enumerate(self.free):
            self.section_matrix[c, j] = 1
        proj = np.zeros((self.dim, n), dtype=np.int64)
        for c in range(n):
            e = np.zeros(n, dtype=np.int64)
            e[c] = 1
            proj[:, c] = kernel.reduce(e)[self.free]
        self.projection_matrix = proj

    def project(self, v) -> np.ndarray:
        return self.kernel.reduce(v)[self.free]

    def section(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64).reshape(-1)
        out = np.zeros(self.kernel.n, dtype=np.int64)
        out[self.free] = u
        return out


def quotient(w: Subspace) -> QuotientMap:
    return QuotientMap(w)


def subspace_of_forms(forms, basis: MonomialBasis, field: FieldDesc) -> Subspace:
    rows = [f.array() if isinstance(f, Form) else np.asarray(f) for f in forms]
    return Subspace(basis.size, field, np.array(rows, dtype=np.int64).reshape(-1, basis.size))


# ---------------------------------------------------------------------------
# distinguished subspaces

WARING_CUBES = [(3,)]
LINEAR_TIMES_SQUARE = [(1, 2)]
QUARTIC_SYMMETRIC = [(3, 1), (1, 3)]


def power_product_form(linear_forms, pattern, basis: MonomialBasis, field: FieldDesc) -> np.ndarray:
    """Coefficients of ``sum_terms prod_j l_j^{e_j}`` for the given linear forms."""
    m = basis.m
    total = np.zeros(basis.size, dtype=np.int64)
    for term in pattern:
        cur = np.ones(1, dtype=np.int64)
        deg = 0
        for lin, k in zip(linear_forms, term):
            for _ in range(k):
                cur = multiply_by_linear(cur, lin, m, deg, field)
                deg += 1
        total = field.add(total, cur)
    return total


def power_product_subspace(basis: MonomialBasis, pattern, field: FieldDesc | None = None) -> Subspace:
    """Span of ``sum_terms prod_j l_j^{e_j}`` over all tuples of linear forms.

    ``pattern`` lists the terms as exponent tuples, e.g. ``[(3,)]`` for cubes of
    linear forms, ``[(1, 2)]`` for ``l1 * l2^2`` and ``[(3, 1), (1, 3)]`` for
    ``l1^3 l2 + l1 l2^3``.
    """
    field = field or ffla.make_field(2)
    pattern = [tuple(t) for t in pattern]
    if not pattern:
        raise ValueError("empty pattern")
    r = len(pattern[0])
    for t in pattern:
        if len(t) != r or sum(t) != basis.d:
            raise ValueError(f"pattern term {t} does not have degree {basis.d}")
    m = basis.m
    vectors = itertools.product(range(field.q), repeat=m)
    lins = [np.array(v, dtype=np.int64) for v in vectors if any(v)]
    rows = []
    if field.q == 2:
        acc_bits: list[int] = []
        acc_piv: list[int] = []
        for combo in itertools.product(lins, repeat=r):
            v = ffla.array_to_bits(power_product_form(combo, pattern, basis, field))
            if ffla.gf2_reduce(v, acc_bits, acc_piv):
                acc_bits, acc_piv = ffla.gf2_rref_rows(acc_bits + [v])
        rows = [ffla.bits_to_array(b, basis.size) for b in acc_bits]
    else:
        sub = Subspace(basis.size, field)
        for combo in itertools.product(lins, repeat=r):
            v = power_product_form(combo, pattern, basis, field)
            if not sub.contains(v):
                sub = Subspace(basis.size, field, np.concatenate([sub.basis, v[None, :]]))
        rows = list(sub.basis)
    return Subspace(basis.size, field, np.array(rows, dtype=np.int64).reshape(-1, basis.size))


# ---------------------------------------------------------------------------
# submodules

def gl_generators(m: int, field: FieldDesc) -> list[np.ndarray]:
    """A generating set of GL_m(F_q): m-cycle, elementary transvection, and
    (for q > 2) a diagonal matrix with a primitive entry."""
    gens = []
    if m == 1:
        return [np.array([[field.gen]], dtype=np.int64)] if field.q > 2 else [ffla.identity(1)]
    cyc = np.zeros((m, m), dtype=np.int64)
    for i in range(m):
        cyc[(i + 1) % m, i] = 1
    gens.append(cyc)
    t = ffla.identity(m)
    t[0, 1] = 1
    gens.append(t)
    if field.q > 2:
        dgn = ffla.identity(m)
        dgn[0, 0] = field.gen
        gens.append(dgn)
    return gens


def is_g_stable(w: Subspace, generators, basis: MonomialBasis | None = None) -> bool:
    """True iff every generator maps every basis vector of ``w`` into ``w``.

    Generators may be m x m group elements (``basis`` required) or already the
    induced N x N matrices.
    """
    field = w.field
    mats = []
    for g in generators:
        g = np.asarray(g, dtype=np.int64)
        if basis is not None and g.shape == (basis.m, basis.m):
            mats.append(sym_matrix(g, basis, field))
        else:
            mats.append(g)
    for s in mats:
        for row in w.basis:
            if not w.contains(ffla.matvec(s, row, field)):
                return False
    return True


def spin(v, mats, field: FieldDesc) -> Subspace:
    """Smallest subspace containing ``v`` and stable under every matrix in ``mats``."""
    n = len(v)
    sub = Subspace(n, field, np.asarray(v, dtype=np.int64)[None, :])
    queue = [np.asarray(v, dtype=np.int64)]
    while queue:
        w = queue.pop()
        for s in mats:
            u = ffla.matvec(s, w, field)
            if not sub.contains(u):
                sub = Subspace(n, field, np.concatenate([sub.basis, u[None, :]]))
                queue.append(u)
                if sub.dim == n:
                    return sub
    return sub


def find_submodules(generators, basis: MonomialBasis, field: FieldDesc | None = None,
                    attempts: int = 20, seed: int = 0) -> list[Subspace]:
    """Proper nonzero submodules found by spinning (best effort).

    Candidate vectors: the monomial basis vectors and null vectors of random
    group-algebra elements; each is spun under the induced matrices and, via the
    transposes, under the dual action (whose annihilators are submodules of V).
    The collection is then closed under sums and intersections.
    """
    field = field or ffla.make_field(2)
    rng = np.random.default_rng(seed)
    n = basis.size
    mats = [sym_matrix(np.asarray(g, dtype=np.int64), basis, field) for g in generators]
    mats_t = [np.ascontiguousarray(s.T) for s in mats]
    found: dict[Subspace, None] = {}

    def consider(sub: Subspace):
        if 0 < sub.dim < n:
            found.setdefault(sub, None)

    eye = ffla.identity(n)
    for i in range(n):
        consider(spin(eye[i], mats, field))
        consider(spin(eye[i], mats_t, field).annihilator())

    words = list(mats)
    for a in mats:
        for b in mats:
            words.append(ffla.matmul(a, b, field))
    for _ in range(attempts):
        algebra = np.zeros((n, n), dtype=np.int64)
        for w in words:
            c = int(rng.integers(0, field.q))
            if c:
                algebra = field.add(algebra, field.mul(w, c))
        for shift in range(field.q):
            elt = field.sub(algebra, field.mul(eye, shift)) if shift else algebra
            for vec in ffla.kernel(elt, field)[:3]:
                consider(spin(vec, mats, field))
            for vec in ffla.kernel(elt.T, field)[:3]:
                consider(spin(vec, mats_t, field).annihilator())

    subs = list(found)
    for a, b in itertools.combinations(subs, 2):
        consider(a.sum(b))
        consider(a.intersection(b))
    result = sorted(found, key=lambda s: (s.dim, s.pivots, s.basis.tobytes()))
    return [s for s in result if is_g_stable(s, mats)]

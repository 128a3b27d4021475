"""Finite field arithmetic, dense linear algebra over F_q, and GL_m(F_q) class data.

Field elements are encoded as integers ``0 <= a < q`` via the polynomial basis
(``a = sum c_i p^i`` represents ``sum c_i x^i`` modulo the field modulus).
Matrices are plain ``numpy`` integer arrays holding such encodings.  Over F_2 the
row-echelon routines switch to Python-int bitsets (bit ``j`` = column ``j``).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_TABLE_Q = 1 << 16


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


# ---------------------------------------------------------------------------
# polynomials over F_p (prime field), coefficient tuples low -> high

def _pmod_prime(a: list[int], m: tuple[int, ...], p: int) -> list[int]:
    a = list(a)
    dm = len(m) - 1
    inv_lead = pow(m[-1], p - 2, p)
    while len(a) - 1 >= dm and any(a):
        while a and a[-1] == 0:
            a.pop()
        if len(a) - 1 < dm:
            break
        c = a[-1] * inv_lead % p
        shift = len(a) - 1 - dm
        for i, mi in enumerate(m):
            a[shift + i] = (a[shift + i] - c * mi) % p
        a.pop()
    while a and a[-1] == 0:
        a.pop()
    return a


def _is_irreducible_prime(poly: tuple[int, ...], p: int) -> bool:
    deg = len(poly) - 1
    if deg <= 1:
        return deg == 1
    for d in range(1, deg // 2 + 1):
        for tail in itertools.product(range(p), repeat=d):
            cand = tuple(tail) + (1,)
            if not _pmod_prime(list(poly), cand, p):
                return False
    return True


def least_irreducible(p: int, e: int) -> tuple[int, ...]:
    """Lexicographically least monic irreducible of degree ``e`` over F_p.

    Candidates are ordered by their coefficient vector read from the top degree
    down, i.e. by the integer ``sum c_i p^i``.
    """
    if e == 1:
        return (0, 1)
    for code in range(p ** e):
        tail = [(code // p ** i) % p for i in range(e)]
        poly = tuple(tail) + (1,)
        if tail[0] != 0 and _is_irreducible_prime(poly, p):
            return poly
    raise ValueError(f"no irreducible polynomial of degree {e} over F_{p}")


# ---------------------------------------------------------------------------
# fields

class FieldDesc:
    """Table-driven finite field F_{p^e}.

    ``exp``/``log`` are discrete log tables with respect to ``gen``, the least
    primitive element.  ``log[0]`` is a placeholder; every multiplication masks
    zero operands explicitly.
    """

    def __init__(self, p: int, e: int):
        if not is_prime(p):
            raise ValueError(f"characteristic {p} is not prime")
        if e < 1 or p ** e > MAX_TABLE_Q:
            raise ValueError(f"field size {p}^{e} outside the table range 2..2^16")
        self.p = p
        self.e = e
        self.q = p ** e
        self.modulus = least_irreducible(p, e)
        self._build_tables()

    def __repr__(self) -> str:
        return f"FieldDesc(p={self.p}, e={self.e})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldDesc) and (self.p, self.e) == (other.p, other.e)

    def __hash__(self) -> int:
        return hash((self.p, self.e))

    def __reduce__(self):
        return (make_field, (self.p, self.e))

    # slow reference multiplication, only used to build the tables
    def _mul_slow(self, a: int, b: int) -> int:
        p, e = self.p, self.e
        if e == 1:
            return a * b % p
        da = [(a // p ** i) % p for i in range(e)]
        db = [(b // p ** i) % p for i in range(e)]
        prod = [0] * (2 * e - 1)
        for i, x in enumerate(da):
            if x:
                for j, y in enumerate(db):
                    prod[i + j] = (prod[i + j] + x * y) % p
        red = _pmod_prime(prod, self.modulus, p)
        return sum(c * p ** i for i, c in enumerate(red))

    def _build_tables(self) -> None:
        q = self.q
        n = q - 1
        factors = [r for r in range(2, n + 1) if n % r == 0 and is_prime(r)]
        gen = None
        for g in range(2 if q > 2 else 1, q):
            # order test via repeated multiplication is fine at q <= 2^16
            ok = True
            for r in factors:
                x = 1
                base = g
                k = n // r
                while k:
                    if k & 1:
                        x = self._mul_slow(x, base)
                    base = self._mul_slow(base, base)
                    k >>= 1
                if x == 1:
                    ok = False
                    break
            if ok:
                gen = g
                break
        assert gen is not None
        self.gen = gen
        exp = np.zeros(2 * n + 2, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        x = 1
        for i in range(n):
            exp[i] = x
            log[x] = i
            x = self._mul_slow(x, gen)
        assert x == 1
        exp[n:2 * n] = exp[:n]
        exp[2 * n:] = exp[:2]
        self.exp = exp
        self.log = log
        self.exp.setflags(write=False)
        self.log.setflags(write=False)

    # -- scalar / vector arithmetic --------------------------------------
    def add(self, a, b):
        if self.p == 2:
            return a ^ b
        if self.e == 1:
            return (a + b) % self.p
        return self._digitwise(a, b, 1)

    def sub(self, a, b):
        if self.p == 2:
            return a ^ b
        if self.e == 1:
            return (a - b) % self.p
        return self._digitwise(a, b, -1)

    def neg(self, a):
        if self.p == 2:
            return a
        return self.sub(0 * a, a)

    def _digitwise(self, a, b, sign):
        p = self.p
        out = 0 * (a + b)
        pw = 1
        for _ in range(self.e):
            da = (a // pw) % p
            db = (b // pw) % p
            out = out + ((da + sign * db) % p) * pw
            pw *= p
        return out

    def mul(self, a, b):
        if isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer)):
            if a == 0 or b == 0:
                return 0
            return int(self.exp[self.log[a] + self.log[b]])
        a = np.asarray(a)
        b = np.asarray(b)
        r = self.exp[self.log[a] + self.log[b]]
        return np.where((a == 0) | (b == 0), 0, r)

    def inv(self, a):
        if isinstance(a, (int, np.integer)):
            if a == 0:
                raise ZeroDivisionError("inverse of zero")
            return int(self.exp[(self.q - 1 - self.log[a]) % (self.q - 1)])
        a = np.asarray(a)
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of zero")
        return self.exp[(self.q - 1 - self.log[a]) % (self.q - 1)]

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a, k: int):
        if isinstance(a, (int, np.integer)):
            if a == 0:
                return 1 if k == 0 else 0
            return int(self.exp[(self.log[a] * k) % (self.q - 1)])
        a = np.asarray(a)
        r = self.exp[(self.log[a] * k) % (self.q - 1)]
        if k == 0:
            return np.ones_like(a)
        return np.where(a == 0, 0, r)

    def frobenius(self, a):
        return self.pow(a, self.p)

    def order(self, a: int) -> int:
        if a == 0:
            raise ValueError("zero has no multiplicative order")
        n = self.q - 1
        return n // math.gcd(n, int(self.log[a]))

    def elements(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)

    def trace_table(self) -> np.ndarray:
        """Absolute trace F_q -> F_p for every element."""
        x = self.elements()
        acc = x.copy()
        y = x
        for _ in range(self.e - 1):
            y = self.frobenius(y)
            acc = self.add(acc, y)
        return acc

    def prime_subfield_element(self, c: int) -> int:
        return c % self.p


@functools.lru_cache(maxsize=None)
def make_field(p: int, e: int = 1) -> FieldDesc:
    """Return the (cached, immutable) field descriptor for F_{p^e}."""
    return FieldDesc(p, e)


def field_of_size(q: int) -> FieldDesc:
    for p in range(2, q + 1):
        if q % p == 0:
            e = round(math.log(q, p))
            if p ** e != q or not is_prime(p):
                raise ValueError(f"{q} is not a prime power")
            return make_field(p, e)
    raise ValueError(f"{q} is not a prime power")


# ---------------------------------------------------------------------------
# GF(2) bitset helpers

def gf2_rref_rows(rows: list[int]) -> tuple[list[int], list[int]]:
    """Reduced echelon form of bit-rows; pivots are the lowest set bits."""
    basis: list[int] = []
    pivots: list[int] = []
    for r in rows:
        for b, pv in zip(basis, pivots):
            if (r >> pv) & 1:
                r ^= b
        if r:
            pv = (r & -r).bit_length() - 1
            for i, b in enumerate(basis):
                if (b >> pv) & 1:
                    basis[i] = b ^ r
            basis.append(r)
            pivots.append(pv)
    order = sorted(range(len(pivots)), key=pivots.__getitem__)
    return [basis[i] for i in order], [pivots[i] for i in order]


def gf2_reduce(v: int, basis: list[int], pivots: list[int]) -> int:
    for b, pv in zip(basis, pivots):
        if (v >> pv) & 1:
            v ^= b
    return v


def gf2_rank(rows: list[int]) -> int:
    return len(gf2_rref_rows(rows)[0])


def gf2_rank_packed(words: np.ndarray, ncols: int) -> int:
    """Rank of a GF(2) matrix stored as rows of little-endian uint64 words."""
    a = np.array(words, dtype=np.uint64, copy=True)
    nrows = a.shape[0]
    rank = 0
    for col in range(ncols):
        if rank == nrows:
            break
        w, b = divmod(col, 64)
        bit = np.uint64(1) << np.uint64(b)
        colbits = (a[rank:, w] & bit) != 0
        hits = np.flatnonzero(colbits)
        if hits.size == 0:
            continue
        piv = rank + hits[0]
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        below = rank + 1 + np.flatnonzero((a[rank + 1:, w] & bit) != 0)
        if below.size:
            a[below] ^= a[rank]
        rank += 1
    return rank


def bits_to_array(bits: int, n: int) -> np.ndarray:
    return np.array([(bits >> i) & 1 for i in range(n)], dtype=np.int64)


def array_to_bits(v) -> int:
    out = 0
    for i, x in enumerate(v):
        if int(x) & 1:
            out |= 1 << i
    return out


# ---------------------------------------------------------------------------
# dense matrices over F_q

def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.int64)


def matmul(a: np.ndarray, b: np.ndarray, field: FieldDesc) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"dimension mismatch {a.shape} x {b.shape}")
    if field.e == 1:
        return (a @ b) % field.p
    out = np.zeros(a.shape[:-1] + b.shape[1:], dtype=np.int64)
    for k in range(a.shape[-1]):
        out = field.add(out, field.mul(a[..., k, None], b[None, k, ...] if b.ndim > 1 else b[k]))
    return out


def matvec(a: np.ndarray, v: np.ndarray, field: FieldDesc) -> np.ndarray:
    return matmul(a, np.asarray(v, dtype=np.int64).reshape(-1, 1), field).reshape(-1)


def rref(m: np.ndarray, field: FieldDesc) -> tuple[np.ndarray, int, list[int]]:
    """Reduced row-echelon form, rank and pivot columns.

    The returned matrix keeps the input shape; zero rows trail.
    """
    m = np.array(m, dtype=np.int64, copy=True)
    if m.ndim != 2:
        raise ValueError("rref expects a 2-d matrix")
    nrows, ncols = m.shape
    if field.q == 2:
        rows = [array_to_bits(r) for r in m]
        basis, pivots = gf2_rref_rows(rows)
        out = np.zeros_like(m)
        for i, b in enumerate(basis):
            out[i] = bits_to_array(b, ncols)
        return out, len(basis), pivots
    pivots = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        m[r] = field.mul(m[r], field.inv(int(m[r, c])))
        for i in range(nrows):
            if i != r and m[i, c]:
                m[i] = field.sub(m[i], field.mul(m[r], int(m[i, c])))
        pivots.append(c)
        r += 1
    return m, r, pivots


def rank(m: np.ndarray, field: FieldDesc) -> int:
    m = np.asarray(m, dtype=np.int64)
    if m.size == 0:
        return 0
    if field.q == 2:
        return gf2_rank([array_to_bits(r) for r in m])
    return rref(m, field)[1]


def kernel(m: np.ndarray, field: FieldDesc) -> np.ndarray:
    """Rows spanning the right null space ``{x : m x = 0}``."""
    m = np.asarray(m, dtype=np.int64)
    ncols = m.shape[1]
    if m.shape[0] == 0:
        return identity(ncols)
    r, rk, pivots = rref(m, field)
    free = [c for c in range(ncols) if c not in set(pivots)]
    out = np.zeros((len(free), ncols), dtype=np.int64)
    for k, fcol in enumerate(free):
        out[k, fcol] = 1
        for i, pc in enumerate(pivots):
            out[k, pc] = field.neg(int(r[i, fcol]))
    return out


def solve(m: np.ndarray, b: np.ndarray, field: FieldDesc) -> np.ndarray | None:
    """One solution of ``m x = b`` or ``None`` when the system is inconsistent."""
    m = np.asarray(m, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64).reshape(-1)
    if m.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {m.shape} vs rhs of length {b.shape[0]}")
    aug = np.concatenate([m, b[:, None]], axis=1)
    r, rk, pivots = rref(aug, field)
    ncols = m.shape[1]
    if pivots and pivots[-1] == ncols:
        return None
    x = np.zeros(ncols, dtype=np.int64)
    for i, pc in enumerate(pivots):
        x[pc] = r[i, ncols]
    return x


def inverse(m: np.ndarray, field: FieldDesc) -> np.ndarray:
    m = np.asarray(m, dtype=np.int64)
    n = m.shape[0]
    aug = np.concatenate([m, identity(n)], axis=1)
    r, rk, pivots = rref(aug, field)
    if pivots[:n] != list(range(n)):
        raise ValueError("matrix is singular")
    return r[:n, n:]


def is_invertible(m: np.ndarray, field: FieldDesc) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and rank(m, field) == m.shape[0]


def random_invertible(n: int, field: FieldDesc, rng: np.random.Generator) -> np.ndarray:
    while True:
        g = rng.integers(0, field.q, size=(n, n), dtype=np.int64)
        if is_invertible(g, field):
            return g


# ---------------------------------------------------------------------------
# GL_m(F_q)

def gl_order(m: int, q: int) -> int:
    if m < 1:
        raise ValueError("dimension must be positive")
    out = 1
    for i in range(m):
        out *= q ** m - q ** i
    return out


@dataclass(frozen=True)
class ConjClass:
    representative: np.ndarray
    size: int
    label: tuple  # ((irreducible poly, partition), ...)


# polynomials over a general F_q: tuples of field ints, low -> high

def _poly_trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_mul(a, b, field: FieldDesc) -> tuple[int, ...]:
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] = field.add(out[i + j], field.mul(x, y))
    return tuple(_poly_trim(out))


def poly_mod(a, m, field: FieldDesc) -> tuple[int, ...]:
    a = list(a)
    dm = len(m) - 1
    inv_lead = field.inv(m[-1])
    _poly_trim(a)
    while len(a) - 1 >= dm and a:
        c = field.mul(a[-1], inv_lead)
        shift = len(a) - 1 - dm
        for i, mi in enumerate(m):
            a[shift + i] = field.sub(a[shift + i], field.mul(c, mi))
        _poly_trim(a)
    return tuple(a)


def _monic_polys(deg: int, field: FieldDesc):
    for tail in itertools.product(range(field.q), repeat=deg):
        yield tuple(tail) + (1,)


@functools.lru_cache(maxsize=None)
def irreducible_polys(deg: int, q: int) -> tuple[tuple[int, ...], ...]:
    """All monic irreducible polynomials of the given degree over F_q."""
    field = field_of_size(q)
    if deg == 1:
        return tuple((c, 1) for c in range(q))
    reducible = set()
    for d in range(1, deg // 2 + 1):
        for f in irreducible_polys(d, q):
            for g in _monic_polys(deg - d, field):
                reducible.add(poly_mul(f, g, field))
    return tuple(p for p in _monic_polys(deg, field) if p not in reducible)


def partitions(n: int, max_part: int | None = None):
    """Partitions of ``n`` as non-increasing tuples."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield ()
        return
    for k in range(min(n, max_part), 0, -1):
        for rest in partitions(n - k, k):
            yield (k,) + rest


def companion(poly, field: FieldDesc) -> np.ndarray:
    """Companion matrix of a monic polynomial (ones on the subdiagonal)."""
    n = len(poly) - 1
    c = np.zeros((n, n), dtype=np.int64)
    for i in range(1, n):
        c[i, i - 1] = 1
    for i in range(n):
        c[i, n - 1] = field.neg(poly[i])
    return c


def _conj_partition(lam: tuple[int, ...]) -> list[int]:
    return [sum(1 for x in lam if x > i) for i in range(lam[0])] if lam else []


def centralizer_order(label, q: int) -> int:
    """|C_{GL}(g)| for the class with the given (polynomial, partition) data."""
    out = 1
    for poly, lam in label:
        Q = q ** (len(poly) - 1)
        conj = _conj_partition(lam)
        expo = sum(x * x for x in conj)
        mult: dict[int, int] = {}
        for part in lam:
            mult[part] = mult.get(part, 0) + 1
        factor = 1
        for mi in mult.values():
            for j in range(1, mi + 1):
                factor *= Q ** j - 1
                expo -= j
        out *= Q ** expo * factor
    return out


def conjugacy_classes(m: int, q: int) -> list[ConjClass]:
    """One rational-canonical-form representative per class of GL_m(F_q)."""
    field = field_of_size(q)
    irr = []
    for d in range(1, m + 1):
        for f in irreducible_polys(d, q):
            if f != (0, 1):
                irr.append(f)
    group_order = gl_order(m, q)
    classes: list[ConjClass] = []

    def emit(label):
        blocks = []
        for poly, lam in label:
            for part in lam:
                power = (1,)
                for _ in range(part):
                    power = poly_mul(power, poly, field)
                blocks.append(companion(power, field))
        rep = np.zeros((m, m), dtype=np.int64)
        pos = 0
        for blk in blocks:
            k = blk.shape[0]
            rep[pos:pos + k, pos:pos + k] = blk
            pos += k
        size = group_order // centralizer_order(label, q)
        classes.append(ConjClass(rep, size, tuple(label)))

    def rec(start, remaining, label):
        if remaining == 0:
            emit(label)
            return
        for i in range(start, len(irr)):
            deg = len(irr[i]) - 1
            if deg > remaining:
                break
            for s in range(1, remaining // deg + 1):
                for lam in partitions(s):
                    rec(i + 1, remaining - deg * s, label + [(irr[i], lam)])

    rec(0, m, [])
    return classes

"""Point counts and zeta functions of cubic fourfolds over F_2.

Two counting routes: direct evaluation over P^5(F_{2^k}) (an oracle for small
k) and the conic-bundle count, which projects the fourfold from a line onto
P^3 and classifies the fiber conics over the discriminant quintic.  The
counts N_1..N_11 determine the Weil polynomial up to the sign of its
functional equation; everything downstream is exact rational arithmetic.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import ffla, hypergeo, symspace
from ._jit import count_zeros_p3, fiber_sum
from .hypergeo import ConicData, LinearSubvariety
from .symspace import Form

log = logging.getLogger(__name__)

COUNT_THRESHOLD = 1 << 26
DEGREE = 22
UNIT_TOL = 1e-8


# ---------------------------------------------------------------------------
# naive counting

def count_points_naive(f: Form, k: int = 1, threshold: int = COUNT_THRESHOLD) -> int:
    """|Z(f)(F_{q^k})| by evaluating f once per projective point."""
    ext = hypergeo.extension(f.field, k)
    total = hypergeo.projective_point_count(f.m, ext.q)
    if total > threshold:
        raise ValueError(f"{total} points exceed the naive threshold {threshold}")
    count = 0
    for pts in hypergeo.projective_points(f.m, ext):
        count += int(np.count_nonzero(hypergeo.evaluate(f, pts, ext) == 0))
    return count


# ---------------------------------------------------------------------------
# tables for F_{2^k}

@dataclass(frozen=True)
class _Tables:
    k: int
    q: int
    exp: np.ndarray
    log: np.ndarray
    trace: np.ndarray
    sqr: np.ndarray
    sqrt: np.ndarray
    wroots: np.ndarray
    nw: np.ndarray
    croots: np.ndarray
    ncr: np.ndarray
    asroots: np.ndarray
    nas: np.ndarray


def _root_table(values: np.ndarray, q: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert w -> values[w]: roots[r] lists every w with values[w] == r."""
    roots = np.zeros((q, width), dtype=np.int64)
    count = np.zeros(q, dtype=np.int64)
    for w in range(q):
        r = int(values[w])
        roots[r, count[r]] = w
        count[r] += 1
    return roots, count


@functools.lru_cache(maxsize=None)
def _tables(k: int) -> _Tables:
    fld = ffla.make_field(2, k)
    q = fld.q
    w = fld.elements()
    sqr = fld.mul(w, w)
    sqrt = np.empty(q, dtype=np.int64)
    sqrt[sqr] = w
    cube = fld.mul(sqr, w)
    wroots, nw = _root_table(cube ^ w, q, 3)
    croots, ncr = _root_table(cube, q, 3)
    asroots, nas = _root_table(sqr ^ w, q, 2)
    # exponents of degree <= 5 monomials index this table without reduction
    exp = np.ascontiguousarray(np.tile(fld.exp[:q - 1], 7))
    return _Tables(k, q, exp, np.ascontiguousarray(fld.log),
                   fld.trace_table().astype(np.int64), sqr, sqrt, wroots, nw, croots, ncr, asroots, nas)


# ---------------------------------------------------------------------------
# conic fibration

def _complete_basis(vectors: list[np.ndarray], n: int) -> list[np.ndarray]:
    """Unit vectors extending independent F_2 vectors to a basis."""
    f2 = ffla.make_field(2)
    rows = [np.asarray(v, dtype=np.int64) % 2 for v in vectors]
    extra = []
    for i in range(n):
        e = np.zeros(n, dtype=np.int64)
        e[i] = 1
        if ffla.rank(np.array(rows + extra + [e]), f2) > len(rows) + len(extra):
            extra.append(e)
        if len(rows) + len(extra) == n:
            break
    return extra


def _line_frame(line: LinearSubvariety) -> np.ndarray:
    """g in GL_6(F_2) whose last two columns span the line."""
    rows = [np.asarray(r) for r in line.rows]
    cols = _complete_basis(rows, 6) + rows
    return np.array(cols, dtype=np.int64).T


def _point_frame(p: np.ndarray) -> np.ndarray:
    """g in GL_6(F_2) acting on y0..y3 only, with g e3 = p."""
    cols = _complete_basis([p], 4) + [p]
    g = np.eye(6, dtype=np.int64)
    g[:4, :4] = np.array(cols, dtype=np.int64).T
    return g


@functools.lru_cache(maxsize=None)
def _p3_points() -> np.ndarray:
    return np.concatenate(list(hypergeo.projective_points(4, ffla.make_field(2))))


def _delta_singular(delta: Form) -> np.ndarray:
    """Rational singular points of a quintic surface in P^3 (all points if it vanishes)."""
    pts = _p3_points()
    mask = hypergeo.evaluate(delta, pts) == 0
    for g in hypergeo.partials(delta):
        if not g.is_zero():
            mask &= hypergeo.evaluate(g, pts) == 0
    return pts[mask]


def _is_cone(conic: ConicData) -> bool:
    return all(g.is_zero() for g in conic.forms()[:5])


def _derived_line(f: Form, line: LinearSubvariety) -> LinearSubvariety | None:
    """The residual line over the common zero of A, B, C, when it exists."""
    g = _line_frame(line)
    conic = hypergeo.conic_data(symspace.act(g, f))
    f2 = f.field
    abc = np.array([conic.A.array(), conic.B.array(), conic.C.array()])
    if ffla.rank(abc, f2) < 3:
        return None
    p = ffla.kernel(abc, f2)[0]
    vals = [int(hypergeo.evaluate(h, p[None, :])[0]) for h in (conic.D, conic.E, conic.F)]
    if not any(vals):
        return None
    # solutions (t, y4, y5) of F(p) t + D(p) y4 + E(p) y5 = 0
    sol = ffla.kernel(np.array([[vals[2], vals[0], vals[1]]]), f2)
    pts = []
    for t, y4, y5 in sol:
        y = np.zeros(6, dtype=np.int64)
        y[:4] = t * p
        y[4], y[5] = y4, y5
        pts.append(ffla.matvec(g, y, f2))
    return LinearSubvariety.from_rows(np.array(pts), f2)


def _singular_delta_point(f: Form, line: LinearSubvariety):
    """(frame, conic, p) if Delta of this line has a rational singular point."""
    g = _line_frame(line)
    conic = hypergeo.conic_data(symspace.act(g, f))
    if _is_cone(conic):
        return g, conic, None
    sing = _delta_singular(hypergeo.discriminant(conic))
    if len(sing) == 0:
        return None
    return g, conic, sing[0]


def choose_good_line(f: Form) -> LinearSubvariety:
    """A rational line on f whose discriminant quintic has a rational singular point."""
    return _choose(f)[0]


def _choose(f: Form):
    if f.m != 6 or f.d != 3 or f.field.q != 2:
        raise ValueError("expected a cubic fourfold over F_2")
    lines = hypergeo.lines_on(f)
    assert lines, "a cubic fourfold over F_2 always contains a rational line"
    first = lines[0]
    candidates = []
    derived = _derived_line(f, first)
    if derived is not None:
        candidates.append(derived)
    candidates.append(first)
    for line in candidates:
        found = _singular_delta_point(f, line)
        if found is not None:
            return (line,) + found
    for line in lines[1:]:
        found = _singular_delta_point(f, line)
        if found is not None:
            return (line,) + found
    g = _line_frame(first)
    return first, g, hypergeo.conic_data(symspace.act(g, f)), None


def _term_array(forms: list[list[tuple[int, ...]]], nvars: int) -> tuple[np.ndarray, np.ndarray]:
    width = max(1, max(len(t) for t in forms))
    arr = np.zeros((len(forms), width, nvars), dtype=np.int64)
    cnt = np.zeros(len(forms), dtype=np.int64)
    for i, terms in enumerate(forms):
        for j, e in enumerate(terms):
            arr[i, j] = e
        cnt[i] = len(terms)
    return arr, cnt


def _support(f: Form) -> list[tuple[int, ...]]:
    if f.field.q != 2:
        raise ValueError("expected coefficients in F_2")
    return [e for c, e in zip(f.coeffs, f.basis.exps) if c]


def _slices_by_last(g: Form, top: int) -> list[list[tuple[int, ...]]]:
    """Split a form in y0..y3 by the power of y3 (0..top)."""
    out = [[] for _ in range(top + 1)]
    for e in _support(g):
        if e[3] > top:
            raise ValueError("unexpected power of the projection variable")
        out[e[3]].append(e[:3])
    return out


@dataclass
class ConicFibration:
    """Everything count_points_conic needs for one cubic, independent of k."""

    line: LinearSubvariety
    transform: np.ndarray
    conic: ConicData
    cone: bool
    direct: bool
    dterms: np.ndarray
    dcnt: np.ndarray
    cterms: np.ndarray
    ccnt: np.ndarray
    p_values: tuple[int, ...]
    line_quadratics: tuple[tuple[int, int, int], ...]

    def singular_on_line(self, k: int) -> int:
        """Singular points of X on the line, over F_{2^k}."""
        q = 2 ** k
        quads = self.line_quadratics
        if all(c == (0, 0, 0) for c in quads):
            return q + 1
        f4 = ffla.make_field(2, 2)
        rational = other = 0
        for x4, x5 in [(1, t) for t in range(4)] + [(0, 1)]:
            vals = [f4.mul(a, f4.mul(x4, x4)) ^ f4.mul(b, f4.mul(x4, x5)) ^ f4.mul(c, f4.mul(x5, x5))
                    for a, b, c in quads]
            if not any(vals):
                if x4 <= 1 and x5 <= 1:
                    rational += 1
                else:
                    other += 1
        return rational + (other if k % 2 == 0 else 0)


def conic_fibration(f: Form, line: LinearSubvariety | None = None, project: bool = True) -> ConicFibration:
    """Prepare the count for one cubic.

    ``line`` overrides the line search; ``project=False`` enumerates the
    discriminant over P^3 directly instead of projecting from a singular point.
    """
    if line is None:
        line, g, conic, p = _choose(f)
    else:
        found = _singular_delta_point(f, line)
        if found is None:
            g = _line_frame(line)
            conic, p = hypergeo.conic_data(symspace.act(g, f)), None
        else:
            g, conic, p = found
    cone = _is_cone(conic)
    direct = False
    if not project:
        p = None
    if cone:
        form_f = conic.F
        # project Y from e3; any coefficient of y3 up to the cube appears
        dterms, dcnt = _term_array(_slices_by_last(form_f, 3), 3)
        cterms, ccnt = _term_array([[] for _ in range(6)], 4)
        pv = (int(hypergeo.evaluate(form_f, np.array([[0, 0, 0, 1]]))[0]),)
    elif p is None:
        log.warning("no line with a rational singular point on the discriminant; counting it directly")
        direct = True
        delta = hypergeo.discriminant(conic)
        dterms, dcnt = _term_array([_support(delta)], 4)
        cterms, ccnt = _term_array([_support(h) for h in conic.forms()], 4)
        pv = ()
    else:
        g = ffla.matmul(g, _point_frame(np.asarray(p, dtype=np.int64)), f.field)
        conic = hypergeo.conic_data(symspace.act(g, f))
        delta = hypergeo.discriminant(conic)
        dterms, dcnt = _term_array(_slices_by_last(delta, 3), 3)
        cterms, ccnt = _term_array([_support(h) for h in conic.forms()], 4)
        e3 = np.array([[0, 0, 0, 1]])
        pv = tuple(int(hypergeo.evaluate(h, e3)[0]) for h in conic.forms())
    quads = tuple(_linear_coefficients(h) for h in (conic.A, conic.B, conic.C))
    quads = tuple((quads[0][i], quads[1][i], quads[2][i]) for i in range(4))
    return ConicFibration(line, g, conic, cone, direct, dterms, dcnt, cterms, ccnt, pv, quads)


def _linear_coefficients(h: Form) -> list[int]:
    out = [0] * h.m
    for c, e in zip(h.coeffs, h.basis.exps):
        if c:
            out[e.index(1)] = int(c)
    return out


def count_points_conic(f: Form, k: int = 1, fibration: ConicFibration | None = None) -> int:
    """|X(F_{2^k})| for a cubic fourfold over F_2 through its conic bundle structure."""
    fb = fibration or conic_fibration(f)
    t = _tables(k)
    q = t.q
    p3 = 1 + q + q * q + q ** 3
    if fb.cone:
        roots, _ = fiber_sum(k, q, t.exp, t.log, t.trace, t.sqr, t.sqrt, t.wroots, t.nw, t.croots, t.ncr,
                             t.asroots, t.nas, fb.dterms, fb.dcnt, fb.cterms, fb.ccnt, False)
        y = int(roots) + (1 if fb.p_values[0] == 0 else 0)
        return y * q * q + q + 1
    if fb.direct:
        npts, fib = count_zeros_p3(q, t.exp, t.log, fb.dterms[0], fb.dcnt[0], fb.cterms, fb.ccnt, True, t.trace)
        n_delta, fib = int(npts), int(fib)
    else:
        roots, fib = fiber_sum(k, q, t.exp, t.log, t.trace, t.sqr, t.sqrt, t.wroots, t.nw, t.croots, t.ncr,
                               t.asroots, t.nas, fb.dterms, fb.dcnt, fb.cterms, fb.ccnt, True)
        fld = ffla.make_field(2, k)
        n_delta = int(roots) + 1
        fib = int(fib) + hypergeo.classify_conic(*fb.p_values, fld)
    blowup = fib + (q + 1) * (p3 - n_delta)
    exceptional = (q + 1) * (1 + q + q * q) + fb.singular_on_line(k) * q ** 3
    return blowup - exceptional + (q + 1)


def count_points(f: Form, k: int = 1, fibration: ConicFibration | None = None) -> int:
    """Conic-bundle count for cubic fourfolds over F_2, naive count otherwise."""
    if f.m == 6 and f.d == 3 and f.field.q == 2 and not f.is_zero():
        return count_points_conic(f, k, fibration)
    return count_points_naive(f, k)


def blowup_points_naive(f: Form, line: LinearSubvariety, k: int = 1) -> int:
    """Sum of fiber conic counts over P^3(F_{2^k}) for the line (oracle for small k)."""
    g = _line_frame(line)
    conic = hypergeo.conic_data(symspace.act(g, f))
    fld = ffla.make_field(2, k)
    total = 0
    for pts in hypergeo.projective_points(4, fld):
        vals = [hypergeo.evaluate(h, pts, fld) for h in conic.forms()]
        for row in zip(*vals):
            total += hypergeo.classify_conic(*(int(v) for v in row), fld)
    return total


# ---------------------------------------------------------------------------
# Weil polynomials

@dataclass
class PointCounts:
    """N_1, N_2, ... over F_{q^k}; extra terms are fetched lazily when needed."""

    q: int
    values: list[int]
    fetch: Callable[[int], int] | None = None

    def get(self, k: int) -> int | None:
        while len(self.values) < k:
            if self.fetch is None:
                return None
            self.values.append(int(self.fetch(len(self.values) + 1)))
        return self.values[k - 1]


@dataclass
class WeilPolynomial:
    """Monic degree-22 polynomial, coefficients ascending."""

    coeffs: tuple[Fraction, ...]
    eps: int | None
    used: tuple[int, ...] = ()
    resolution: str = ""
    flagged: bool = False
    alternatives: tuple[tuple[Fraction, ...], ...] = dc_field(default=())
    unit_circle: bool | None = None  # cached root test, None when not run

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def doubled(self) -> list[int]:
        """Integer coefficients of 2P, lowest degree first."""
        out = []
        for c in self.coeffs:
            d = 2 * c
            if d.denominator != 1:
                raise ValueError("coefficient outside (1/2)Z")
            out.append(int(d))
        return out

    def __call__(self, x) -> Fraction:
        return poly_eval(self.coeffs, Fraction(x))


def poly_eval(coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def power_sums(counts: PointCounts, kmax: int, m: int = 6) -> list[Fraction]:
    """Normalized Frobenius power sums on primitive middle cohomology."""
    q = counts.q
    out = []
    for k in range(1, kmax + 1):
        n = counts.get(k)
        if n is None:
            raise ValueError(f"missing point count N_{k}")
        ambient = sum(q ** (i * k) for i in range(m - 1))
        out.append(Fraction(n - ambient, q ** (2 * k)))
    return out


def elementary_from_power(p: Sequence[Fraction]) -> list[Fraction]:
    """e_0..e_n from power sums p_1..p_n by Newton's identities."""
    e = [Fraction(1)]
    for k in range(1, len(p) + 1):
        s = Fraction(0)
        for i in range(1, k + 1):
            term = e[k - i] * p[i - 1]
            s += term if i % 2 else -term
        e.append(s / k)
    return e


def _assemble(e: list[Fraction], eps: int, n: int = DEGREE) -> tuple[Fraction, ...]:
    """Coefficients a_0..a_n of prod(t - alpha) from e_0..e_{n/2} and the sign."""
    a = [Fraction(0)] * (n + 1)
    half = n // 2
    sign = -1 if eps else 1
    for k in range(half + 1):
        a[n - k] = e[k] if k % 2 == 0 else -e[k]
    for k in range(half):
        a[k] = sign * a[n - k]
    return tuple(a)


def _half_integral(coeffs) -> bool:
    return all((2 * c).denominator == 1 for c in coeffs)


def roots_on_unit_circle(coeffs, tol: float = UNIT_TOL) -> bool:
    """Every complex root within ``tol`` of |t| = 1 (squarefree part, high precision)."""
    import mpmath
    import sympy

    t = sympy.Symbol("t")
    poly = sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in reversed(coeffs)], t)
    sqf = sympy.sqf_part(poly)
    if sqf.degree() <= 0:
        return True
    with mpmath.workdps(60):
        roots = mpmath.polyroots([mpmath.mpf(int(c.p)) / int(c.q) for c in sqf.all_coeffs()],
                                 maxsteps=400, extraprec=200)
        return all(abs(abs(r) - 1) < tol for r in roots)


def weil_from_counts(counts: PointCounts | Sequence[int], q: int = 2,
                     fetch: Callable[[int], int] | None = None,
                     unit_circle_first: bool = False, square_test: bool = False) -> WeilPolynomial:
    """Reconstruct P_X from N_1..N_11, resolving the functional-equation sign.

    With e_11 != 0 the sign is forced.  Otherwise N_12 (then N_13) is fetched
    and e_{11+j} compared with e_{11-j}; if that stays silent, both candidates
    are tested for roots on the unit circle and the entry is flagged when both
    pass.  ``unit_circle_first`` runs the root test before fetching extra
    counts; it only decides when exactly one candidate passes, which the true
    polynomial always does, so the answer is unchanged.

    ``square_test`` adds one more necessary condition, valid for smooth cubic
    fourfolds over F_2: 2 P(-1) is a square.  With eps = 1, P(-1) = 0, so it
    can only rule out eps = 0.
    """
    if not isinstance(counts, PointCounts):
        counts = PointCounts(q, list(counts), fetch)
    half = DEGREE // 2
    p = power_sums(counts, half)
    e = elementary_from_power(p)
    used = tuple(range(1, half + 1))
    if e[half] != 0:
        return _finish(_assemble(e, 0), 0, used, "e11")
    circle: dict[int, bool] = {}

    def on_circle(eps: int) -> bool:
        if eps not in circle:
            cand = _assemble(e, eps)
            circle[eps] = _half_integral(cand) and roots_on_unit_circle(cand)
        return circle[eps]

    def square_ok(eps: int) -> bool:
        return not square_test or is_square(int(2 * poly_eval(_assemble(e, eps), Fraction(-1))))

    def decide(used) -> WeilPolynomial | None:
        survivors = [eps for eps in (0, 1) if on_circle(eps)]
        how = "unit-circle"
        if len(survivors) == 2:
            survivors = [eps for eps in survivors if square_ok(eps)]
            how = "square"
        if len(survivors) == 1:
            w = _finish(_assemble(e, survivors[0]), survivors[0], used, how)
            w.unit_circle = True
            return w
        if not survivors:
            raise ValueError("no sign gives a Weil polynomial")
        return None

    if unit_circle_first:
        w = decide(used)
        if w is not None:
            return w
    # e_11 = 0: compare e_{11+j} with e_{11-j} using extra counts
    for j in (1, 2):
        k = half + j
        if counts.get(k) is None:
            break
        ek = elementary_from_power(power_sums(counts, k))[k]
        used = tuple(range(1, k + 1))
        lo = e[half - j]
        if lo != 0:
            if ek == lo:
                eps = 0
            elif ek == -lo:
                eps = 1
            else:
                raise ValueError(f"N_{k} is inconsistent with the functional equation")
            w = _finish(_assemble(e, eps), eps, used, f"N{k}")
            w.unit_circle = circle.get(eps)
            return w
    w = decide(used)
    if w is not None:
        return w
    cands = tuple(_assemble(e, eps) for eps in (0, 1))
    return WeilPolynomial(cands[0], None, used, "ambiguous", True, cands, True)


def _finish(coeffs, eps, used, how) -> WeilPolynomial:
    if not _half_integral(coeffs):
        raise ValueError("coefficients outside (1/2)Z: the point counts are inconsistent")
    return WeilPolynomial(coeffs, eps, used, how)


def q_polynomial(w: WeilPolynomial) -> list[int]:
    """Integer coefficients of Q_X(s) = (-1)^eps P_X(4s), constant term 1."""
    if w.eps is None:
        raise ValueError("sign of the functional equation unresolved")
    sign = -1 if w.eps else 1
    out = []
    for i, a in enumerate(w.coeffs):
        c = sign * a * 4 ** i
        if c.denominator != 1:
            raise ValueError("non-integral coefficient in Q_X")
        out.append(int(c))
    if out[0] != 1:
        raise ValueError("Q_X(0) != 1")
    return out


def weil_from_q(qcoeffs: Sequence[int], eps: int) -> tuple[Fraction, ...]:
    sign = -1 if eps else 1
    return tuple(sign * Fraction(c, 4 ** i) for i, c in enumerate(qcoeffs))


# ---------------------------------------------------------------------------
# Newton polygon

def v2(n: int) -> int:
    n = abs(n)
    return (n & -n).bit_length() - 1


@dataclass(frozen=True)
class NewtonData:
    slopes: tuple[Fraction, ...]
    height: int | None  # None means infinite height

    @property
    def label(self) -> str:
        return "inf" if self.height is None else str(self.height)


def newton_slopes(coeffs: Sequence[int]) -> list[Fraction]:
    """Slopes (with multiplicity) of the lower convex hull of (i, v_2(c_i))."""
    pts = [(i, v2(c)) for i, c in enumerate(coeffs) if c != 0]
    hull: list[tuple[int, int]] = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly below the chord
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    slopes = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        slopes += [Fraction(y2 - y1, x2 - x1)] * (x2 - x1)
    return slopes


def newton_height(qcoeffs: Sequence[int]) -> NewtonData:
    slopes = newton_slopes(qcoeffs)
    if len(slopes) != len(qcoeffs) - 1:
        raise ValueError("leading coefficient of Q_X vanishes")
    mirrored = sorted(4 - s for s in slopes)
    if sorted(slopes) != mirrored:
        raise ValueError("Newton slopes are not symmetric about 2")
    low = min(slopes)
    if low >= 2:
        return NewtonData(tuple(slopes), None)
    inv = 1 / (2 - low)
    if inv.denominator != 1:
        raise ValueError(f"minimal slope {low} is not of the form 2 - 1/h")
    h = int(inv)
    if sum(1 for s in slopes if s == low) != h or sum(1 for s in slopes if s < 2) != h:
        raise ValueError("slope profile does not match a height")
    return NewtonData(tuple(slopes), h)


# ---------------------------------------------------------------------------
# cyclotomic factors and ranks

def _poly_divmod(num: list, den: list) -> tuple[list, list]:
    """Division by a monic polynomial; coefficients ascending."""
    num = list(num)
    dn = len(den) - 1
    if len(num) - 1 < dn:
        return [0], num
    quo = [0] * (len(num) - dn)
    for i in range(len(num) - 1, dn - 1, -1):
        c = num[i]
        quo[i - dn] = c
        if c:
            for j in range(dn + 1):
                num[i - dn + j] -= c * den[j]
    rem = num[:dn] or [0]
    return quo, rem


@functools.lru_cache(maxsize=None)
def cyclotomic(n: int) -> tuple[int, ...]:
    """Phi_n with integer coefficients, ascending."""
    poly = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            poly, rem = _poly_divmod(poly, list(cyclotomic(d)))
            assert not any(rem)
    return tuple(int(c) for c in poly)


def euler_phi(n: int) -> int:
    out = n
    x = n
    p = 2
    while p * p <= x:
        if x % p == 0:
            while x % p == 0:
                x //= p
            out -= out // p
        p += 1
    if x > 1:
        out -= out // x
    return out


@functools.lru_cache(maxsize=None)
def cyclotomic_indices(max_degree: int = DEGREE) -> tuple[int, ...]:
    """Every n with phi(n) <= max_degree (phi(n) >= sqrt(n/2) bounds the search)."""
    bound = 2 * max_degree * max_degree + 2
    return tuple(n for n in range(1, bound + 1) if euler_phi(n) <= max_degree)


@dataclass(frozen=True)
class RankData:
    cyc: tuple[Fraction, ...]
    noncyc: tuple[Fraction, ...]
    m: int
    n: int
    factors: tuple[tuple[int, int], ...]  # (index j, multiplicity)

    @property
    def algebraic_rank(self) -> int:
        """Rank of CH^2(X), counting the square of the hyperplane class."""
        return self.m + 1

    @property
    def geometric_rank(self) -> int:
        return self.n + 1


def cyclotomic_split(coeffs: Sequence[Fraction]) -> RankData:
    rest = [Fraction(c) for c in coeffs]
    cyc = [Fraction(1)]
    factors = []
    m = 0
    for j in cyclotomic_indices(len(rest) - 1):
        phi = list(cyclotomic(j))
        if len(phi) > len(rest):
            continue
        mult = 0
        while len(rest) >= len(phi):
            quo, rem = _poly_divmod(rest, phi)
            if any(rem):
                break
            rest = quo
            mult += 1
        if mult:
            factors.append((j, mult))
            for _ in range(mult):
                cyc = _poly_mul(cyc, phi)
            if j == 1:
                m = mult
    return RankData(tuple(cyc), tuple(rest), m, len(cyc) - 1, tuple(factors))


def _poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def k3_part(coeffs: Sequence[Fraction]) -> tuple[Fraction, ...] | None:
    """P_X(t) / (t - 1) when t = 1 is a root (monic normalization), else None."""
    quo, rem = _poly_divmod([Fraction(c) for c in coeffs], [-1, 1])
    if any(rem):
        return None
    return tuple(Fraction(c) for c in quo)


def doubled(coeffs: Sequence[Fraction]) -> list[int]:
    out = []
    for c in coeffs:
        d = 2 * Fraction(c)
        if d.denominator != 1:
            raise ValueError("coefficient outside (1/2)Z")
        out.append(int(d))
    return out


def is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


# ---------------------------------------------------------------------------
# lines

def galkin_shinder_lines(n1: int, n2: int, sing: int = 0) -> int:
    """Rational lines on a cubic fourfold over F_2 from |X(F_2)|, |X(F_4)| and singular points."""
    # [X^(2)] = (1 + L^4)[X] + L^2 [F(X)], read off at q = 2
    num = n1 * n1 - 2 * (1 + 2 ** 4) * n1 + n2
    if num % 8:
        raise ValueError("point counts give a non-integral line count")
    return num // 8 + 4 * sing


# ---------------------------------------------------------------------------
# full pipeline

@dataclass
class ZetaResult:
    counts: list[int]
    weil: WeilPolynomial
    qpoly: list[int] | None
    newton: NewtonData | None
    ranks: RankData | None
    k3: tuple[Fraction, ...] | None
    unit_circle: bool | None

    def record(self) -> dict:
        """JSON-ready invariants; an unresolved sign leaves the candidates in ``weil2_alt``."""
        w = self.weil
        out = {
            "counts": list(self.counts),
            "weil2": None if w.eps is None else w.doubled(),
            "eps": w.eps,
            "height": None if self.newton is None else self.newton.label,
            "rk_alg": None if self.ranks is None else self.ranks.algebraic_rank,
            "rk_geom": None if self.ranks is None else self.ranks.geometric_rank,
            "k3part": None if self.k3 is None else doubled(self.k3),
            "sign_from": w.resolution,
        }
        if w.eps is None:
            out["weil2_alt"] = [doubled(c) for c in w.alternatives]
        return out


def zeta(f: Form, kmax: int = DEGREE // 2, check_roots: bool = True) -> ZetaResult:
    """Point counts, Weil polynomial and derived invariants of a cubic fourfold over F_2."""
    fb = conic_fibration(f)
    counts = [count_points_conic(f, k, fb) for k in range(1, kmax + 1)]
    pc = PointCounts(2, counts, lambda k: count_points_conic(f, k, fb))
    w = weil_from_counts(pc, unit_circle_first=True, square_test=True)
    unit = w.unit_circle
    if unit is None:
        unit = roots_on_unit_circle(w.coeffs) if check_roots else None
    if w.eps is None:
        return ZetaResult(pc.values, w, None, None, None, None, unit)
    qp = q_polynomial(w)
    return ZetaResult(pc.values, w, qp, newton_height(qp), cyclotomic_split(w.coeffs), k3_part(w.coeffs), unit)

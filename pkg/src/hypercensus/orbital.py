"""Orbits of GL_m(F_q) and its subgroups on spaces of forms.

Points of V are encoded as integers in an *adapted* basis: the first
``dim W_1`` coordinates span W_1, the next ones complete W_2, and so on.  With
base-q digits in that order the projection V -> V/W_i is ``code // q**dim(W_i)``
and a fiber of V/W_{i-1} -> V/W_i is a contiguous block of digits.

Every orbit is represented by its least code, computed level by level: least
point of the top quotient orbit, then least point of the fiber orbit under the
stabilizer of the part above.  The result is a canonical form, so two forms
are equivalent exactly when their canonical codes agree.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Iterator

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import ffla, permgroup, symspace
from .ffla import FieldDesc
from .symspace import Form, MonomialBasis, Subspace

log = logging.getLogger(__name__)

NAIVE_THRESHOLD = 1 << 24
FIBER_THRESHOLD = 1 << 24


# ---------------------------------------------------------------------------
# groups

class GroupSpec:
    """A subgroup of GL_m(F_q) given by generators and its exact order."""

    def __init__(self, m: int, field: FieldDesc, generators, order: int | None = None,
                 full_gl: bool = False):
        self.m = m
        self.field = field
        self.generators = [np.asarray(g, dtype=np.int64) for g in generators]
        for g in self.generators:
            if g.shape != (m, m) or not ffla.is_invertible(g, field):
                raise ValueError("generators must be invertible m x m matrices")
        self.full_gl = full_gl
        self._bsgs = None
        if order is None:
            order = self.bsgs().order()
        self.order = int(order)

    @classmethod
    def gl(cls, m: int, field: FieldDesc) -> "GroupSpec":
        return cls(m, field, symspace.gl_generators(m, field), ffla.gl_order(m, field.q), full_gl=True)

    @classmethod
    def trivial(cls, m: int, field: FieldDesc) -> "GroupSpec":
        return cls(m, field, [], 1)

    def __repr__(self) -> str:
        return f"GroupSpec(m={self.m}, q={self.field.q}, order={self.order})"

    @property
    def degree(self) -> int:
        return permgroup.degree(self.m, self.field.q)

    def perms(self) -> list[np.ndarray]:
        return [permgroup.matrix_to_perm(g, self.field) for g in self.generators]

    def bsgs(self) -> permgroup.BSGS:
        if self._bsgs is None:
            order = getattr(self, "order", None)
            self._bsgs = permgroup.build_bsgs(self.perms(), self.degree, order=order,
                                              base_hint=[self.field.q ** j - 1 for j in range(self.m)])
        return self._bsgs

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        return permgroup.perm_to_matrix(self.bsgs().random_element(rng), self.m, self.field)

    def elements(self):
        for p in self.bsgs().elements():
            yield permgroup.perm_to_matrix(p, self.m, self.field)

    def conjugacy_classes(self) -> list[ffla.ConjClass]:
        """Classes for GL; for other groups every element is its own 'class'."""
        if self.full_gl:
            return ffla.conjugacy_classes(self.m, self.field.q)
        if self.order > 2_000_000:
            raise ValueError("element enumeration of this group is too large")
        return [ffla.ConjClass(g, 1, ()) for g in self.elements()]

    def contains(self, g: np.ndarray) -> bool:
        return self.bsgs().contains(permgroup.matrix_to_perm(g, self.field))


# ---------------------------------------------------------------------------
# filtrations

class Filtration:
    """Chain ``0 = W_0 < W_1 < ... < W_l < V`` of subspaces with an adapted basis."""

    def __init__(self, basis: MonomialBasis, field: FieldDesc, subspaces=()):
        self.basis = basis
        self.field = field
        n = basis.size
        self.subspaces: list[Subspace] = list(subspaces)
        prev = 0
        for i, w in enumerate(self.subspaces):
            if w.n != n:
                raise ValueError("subspace lives in the wrong ambient space")
            if w.dim <= prev or w.dim >= n:
                raise ValueError("filtration must be strictly increasing and proper")
            if i and not w.contains_subspace(self.subspaces[i - 1]):
                raise ValueError("filtration is not a chain")
            prev = w.dim
        self.dims = [0] + [w.dim for w in self.subspaces] + [n]
        rows: list[np.ndarray] = []
        span = Subspace(n, field)
        for w in self.subspaces + [Subspace.full(n, field)]:
            for r in w.basis:
                red = span.reduce(r)
                if red.any():
                    rows.append(red)
                    span = Subspace(n, field, np.array(rows))
        self.adapted = np.array(rows, dtype=np.int64)           # v = adapted.T @ c
        self.adapted_t = np.ascontiguousarray(self.adapted.T)
        self.to_adapted = ffla.inverse(self.adapted_t, field)    # c = to_adapted @ v
        self.quotients = [symspace.quotient(w) for w in self.subspaces]
        self._induced: dict[bytes, np.ndarray] = {}

    @property
    def length(self) -> int:
        return len(self.subspaces)

    def __repr__(self) -> str:
        return f"Filtration(dims={self.dims})"

    # -- construction ----------------------------------------------------
    @classmethod
    def trivial(cls, basis: MonomialBasis, field: FieldDesc) -> "Filtration":
        return cls(basis, field, [])

    @classmethod
    def waring(cls, basis: MonomialBasis, field: FieldDesc | None = None) -> "Filtration":
        """Cubes of linear forms inside products l1 * l2^2 (cubic forms)."""
        field = field or ffla.make_field(2)
        if basis.d != 3:
            raise ValueError("the Waring chain is defined for cubic forms")
        w1 = symspace.power_product_subspace(basis, symspace.WARING_CUBES, field)
        w2 = symspace.power_product_subspace(basis, symspace.LINEAR_TIMES_SQUARE, field)
        chain = [w for w in (w1, w2) if 0 < w.dim < basis.size]
        return cls(basis, field, _dedupe_chain(chain))

    @classmethod
    def quartic(cls, basis: MonomialBasis, field: FieldDesc | None = None) -> "Filtration":
        """Span of l1^3 l2 + l1 l2^3 (quartic forms)."""
        field = field or ffla.make_field(2)
        w = symspace.power_product_subspace(basis, symspace.QUARTIC_SYMMETRIC, field)
        return cls(basis, field, [w] if 0 < w.dim < basis.size else [])

    @classmethod
    def auto(cls, basis: MonomialBasis, field: FieldDesc, group: GroupSpec | None = None,
             attempts: int = 10) -> "Filtration":
        """Best chain among discovered submodules (smallest largest step)."""
        gens = (group or GroupSpec.gl(basis.m, field)).generators
        subs = symspace.find_submodules(gens, basis, field, attempts=attempts)
        return cls(basis, field, best_chain(subs, basis.size))

    def check_stable(self, generators) -> list[bool]:
        mats = [symspace.sym_matrix(g, self.basis, self.field) for g in generators]
        return [symspace.is_g_stable(w, mats) for w in self.subspaces]

    # -- coordinates -----------------------------------------------------
    def induced(self, g: np.ndarray) -> np.ndarray:
        """Matrix of act(g, .) in adapted coordinates (block upper triangular)."""
        g = np.asarray(g, dtype=np.int64)
        key = g.tobytes()
        a = self._induced.get(key)
        if a is None:
            s = symspace.sym_matrix(g, self.basis, self.field)
            a = ffla.matmul(ffla.matmul(self.to_adapted, s, self.field), self.adapted_t, self.field)
            if len(self._induced) > 4096:
                self._induced.clear()
            self._induced[key] = a
        return a

    # -- file format -----------------------------------------------------
    def dumps(self) -> str:
        lines = [f"{self.basis.m} {self.basis.d} {self.field.q} {self.length}"]
        for w in self.subspaces:
            lines.append(str(w.dim))
            for r in w.basis:
                lines.append(symspace.format_coeff_string(Form.from_array(self.basis, self.field, r)))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Filtration":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise ValueError("empty filtration file")
        m, d, q, ell = (int(t) for t in lines[0].split())
        basis = symspace.monomials(m, d)
        field = ffla.field_of_size(q)
        pos = 1
        subs = []
        for _ in range(ell):
            k = int(lines[pos])
            rows = [symspace.parse_coeff_string(lines[pos + 1 + j], basis, field).array() for j in range(k)]
            pos += 1 + k
            w = Subspace(basis.size, field, np.array(rows, dtype=np.int64).reshape(-1, basis.size))
            if w.dim != k:
                raise ValueError("filtration rows are dependent")
            subs.append(w)
        return cls(basis, field, subs)


def _dedupe_chain(chain):
    out = []
    for w in sorted(chain, key=lambda s: s.dim):
        if not out or w.dim > out[-1].dim:
            out.append(w)
    return out


def best_chain(subspaces, n: int) -> list[Subspace]:
    """Chain through the given subspaces minimizing (largest step, length)."""
    subs = sorted(set(subspaces), key=lambda s: s.dim)
    best: list[tuple[tuple[int, int], list[Subspace]]] = []
    for i, s in enumerate(subs):
        cand = ((s.dim, 1), [s])
        for j in range(i):
            t = subs[j]
            if t.dim < s.dim and s.contains_subspace(t):
                (gap, length), chain = best[j]
                key = (max(gap, s.dim - t.dim), length + 1)
                if key < cand[0]:
                    cand = (key, chain + [s])
        best.append(cand)
    choice = ((n, 0), [])
    for (gap, length), chain in best:
        key = (max(gap, n - chain[-1].dim), length)
        if key < choice[0]:
            choice = (key, chain)
    return choice[1]


# ---------------------------------------------------------------------------
# records and patches

@dataclass
class OrbitRecord:
    representative: Form
    stabilizer_generators: list[np.ndarray]
    stabilizer_order: int
    orbit_size: int
    code: int = -1

    def key(self) -> str:
        return self.representative.coeff_string()


@dataclass
class AffinePatch:
    """The coset ``base + direction``."""

    base: Form
    direction: Subspace

    @classmethod
    def whole(cls, basis: MonomialBasis, field: FieldDesc) -> "AffinePatch":
        return cls(Form.zero(basis, field), Subspace.full(basis.size, field))

    @property
    def size(self) -> int:
        return self.base.field.q ** self.direction.dim

    def points(self) -> Iterator[np.ndarray]:
        field = self.base.field
        base = self.base.array()
        for coeffs in np.ndindex(*([field.q] * self.direction.dim)):
            v = base.copy()
            for c, row in zip(coeffs, self.direction.basis):
                if c:
                    v = field.add(v, field.mul(row, c))
            yield v

    def contains(self, f: Form) -> bool:
        return self.direction.contains(self.base.field.sub(f.array(), self.base.array()))


# ---------------------------------------------------------------------------
# integer coding of digit vectors

class _Coder:
    def __init__(self, field: FieldDesc):
        self.field = field
        self.q = field.q

    def encode(self, digits: np.ndarray) -> np.ndarray:
        digits = np.asarray(digits, dtype=np.int64)
        k = digits.shape[-1]
        w = self.q ** np.arange(k, dtype=np.int64)
        return digits @ w

    def decode(self, codes, k: int) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        out = np.empty(codes.shape + (k,), dtype=np.int64)
        c = codes.copy()
        for j in range(k):
            out[..., j] = c % self.q
            c //= self.q
        return out

    def matvec_rows(self, mat: np.ndarray, digits: np.ndarray) -> np.ndarray:
        """``digits @ mat.T`` over the field (rows of digits are vectors)."""
        f = self.field
        if f.e == 1:
            return (digits @ mat.T) % f.p
        out = np.zeros(digits.shape[:-1] + (mat.shape[0],), dtype=np.int64)
        for j in range(mat.shape[1]):
            out = f.add(out, f.mul(digits[..., j:j + 1], mat[:, j][None, :]))
        return out


class _AffineMap:
    """``u -> M u + c`` on codes of F_q^k."""

    CHUNK = 1 << 16

    def __init__(self, mat: np.ndarray, const: np.ndarray, coder: _Coder):
        self.mat = np.asarray(mat, dtype=np.int64)
        self.const = np.asarray(const, dtype=np.int64)
        self.coder = coder
        self.k = self.mat.shape[0]
        self.trivial = (not self.const.any()) and np.array_equal(self.mat, ffla.identity(self.k))
        if coder.q == 2:
            cols = [ffla.array_to_bits(self.mat[:, j]) for j in range(self.k)]
            self._c = ffla.array_to_bits(self.const)
            self._tables = []
            for start in range(0, self.k, 8):
                part = cols[start:start + 8]
                tab = np.zeros(1 << len(part), dtype=np.int64)
                for b in range(1, 1 << len(part)):
                    low = (b & -b).bit_length() - 1
                    tab[b] = tab[b & (b - 1)] ^ part[low]
                self._tables.append((start, len(part), tab))

    def apply(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        if self.coder.q == 2:
            out = np.full(codes.shape, self._c, dtype=np.int64)
            for start, width, tab in self._tables:
                out ^= tab[(codes >> start) & ((1 << width) - 1)]
            return out
        out = np.empty_like(codes)
        for s in range(0, codes.size, self.CHUNK):
            chunk = codes[s:s + self.CHUNK]
            dg = self.coder.decode(chunk, self.k)
            img = self.coder.field.add(self.coder.matvec_rows(self.mat, dg), self.const[None, :])
            out[s:s + self.CHUNK] = self.coder.encode(img)
        return out

    def apply_one(self, code: int) -> int:
        return int(self.apply(np.array([code], dtype=np.int64))[0])


# ---------------------------------------------------------------------------
# orbits of a group on a finite set given by maps

@dataclass
class _Partition:
    reps: np.ndarray          # least point of each orbit (as index into the point set)
    sizes: np.ndarray
    labels: np.ndarray | None  # orbit number of each point
    images: list[np.ndarray]


def _partition(n: int, images: list[np.ndarray]) -> _Partition:
    if not images:
        idx = np.arange(n, dtype=np.int64)
        return _Partition(idx, np.ones(n, dtype=np.int64), None, [])
    src = np.tile(np.arange(n, dtype=np.int64), len(images))
    dst = np.concatenate(images)
    graph = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(n, n)).tocsr()
    ncomp, labels = connected_components(graph, directed=True, connection="weak")
    _, first, counts = np.unique(labels, return_index=True, return_counts=True)
    order = np.argsort(first)
    reps = first[order].astype(np.int64)
    sizes = counts[order].astype(np.int64)
    relabel = np.empty(ncomp, dtype=np.int64)
    relabel[labels[reps]] = np.arange(ncomp)
    return _Partition(reps, sizes, relabel[labels], images)


def _bfs_forest(n: int, roots: np.ndarray, images: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Parent pointers and generator labels of a BFS forest from ``roots``."""
    parent = np.full(n, -1, dtype=np.int64)
    label = np.full(n, -1, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    seen[roots] = True
    frontier = np.asarray(roots, dtype=np.int64)
    while frontier.size:
        nxt = []
        for gi, img in enumerate(images):
            tgt = img[frontier]
            mask = ~seen[tgt]
            if not mask.any():
                continue
            tgt, idx = np.unique(tgt[mask], return_index=True)
            src = frontier[mask][idx]
            seen[tgt] = True
            parent[tgt] = src
            label[tgt] = gi
            nxt.append(tgt)
        frontier = np.concatenate(nxt) if nxt else np.empty(0, dtype=np.int64)
    return parent, label


def _path_word(point: int, parent: np.ndarray, label: np.ndarray) -> list[int]:
    """Generator indices along the tree path root -> point."""
    word = []
    while parent[point] >= 0:
        word.append(int(label[point]))
        point = int(parent[point])
    word.reverse()
    return word


class _GroupState:
    """Generators (as matrices and permutations), order and a BSGS."""

    def __init__(self, mats, order: int, field: FieldDesc, m: int, bsgs: permgroup.BSGS | None = None):
        self.mats = [np.asarray(g, dtype=np.int64) for g in mats]
        self.order = int(order)
        self.field = field
        self.m = m
        self.perms = [permgroup.matrix_to_perm(g, field) for g in self.mats]
        self._bsgs = bsgs

    def bsgs(self) -> permgroup.BSGS:
        if self._bsgs is None:
            self._bsgs = permgroup.build_bsgs(self.perms, permgroup.degree(self.m, self.field.q),
                                              order=self.order,
                                              base_hint=[self.field.q ** j - 1 for j in range(self.m)])
        return self._bsgs


# ---------------------------------------------------------------------------
# the engine

@dataclass
class SubtreeTask:
    """Orbit in a quotient of the filtration: point code, stabilizer, and next level."""

    z: int
    mats: list[np.ndarray]
    order: int
    level: int = 1


@dataclass
class RunStats:
    fiber_work: int = 0
    fibers: int = 0
    points: int = 0
    per_level: list[int] = dc_field(default_factory=list)


class OrbitEngine:
    """Level-by-level orbit machinery for one (group, filtration) pair."""

    def __init__(self, group: GroupSpec, filtration: Filtration, seed: int = 0):
        if group.m != filtration.basis.m or group.field != filtration.field:
            raise ValueError("group and filtration do not match")
        self.group = group
        self.filt = filtration
        self.field = filtration.field
        self.basis = filtration.basis
        self.q = self.field.q
        self.n = self.basis.size
        if self.q ** self.n >= 1 << 62:
            raise ValueError("space too large for integer point codes")
        self.coder = _Coder(self.field)
        dims = filtration.dims
        self.levels = [(dims[i], dims[i + 1]) for i in range(len(dims) - 2, -1, -1)]
        self.seed = seed
        self.stats = RunStats(per_level=[0] * len(self.levels))
        self._stab_cache: dict[tuple[int, int], _GroupState] = {}
        self._top_state = _GroupState(group.generators, group.order, self.field, group.m,
                                      group.bsgs() if group.order > 1 else None)

    # -- conversions -----------------------------------------------------
    def code_of(self, f: Form) -> int:
        c = ffla.matvec(self.filt.to_adapted, f.array(), self.field)
        return int(self.coder.encode(c))

    def form_of(self, code: int) -> Form:
        c = self.coder.decode(np.array(code, dtype=np.int64), self.n)
        v = ffla.matvec(self.filt.adapted_t, c, self.field)
        return Form.from_array(self.basis, self.field, v)

    def patch_codes(self, patch: AffinePatch, lo: int) -> np.ndarray:
        """Sorted distinct codes of the image of ``patch`` in V/W_lo."""
        k = patch.direction.dim
        base = ffla.matvec(self.filt.to_adapted, patch.base.array(), self.field)
        dirs = ffla.matmul(patch.direction.basis, self.filt.to_adapted.T, self.field)
        out = []
        for s in range(0, self.q ** k, 1 << 16):
            combo = self.coder.decode(np.arange(s, min(s + (1 << 16), self.q ** k), dtype=np.int64), k)
            vecs = self.field.add(self.coder.matvec_rows(dirs.T, combo), base[None, :])
            out.append(self.coder.encode(vecs[:, lo:]))
        return np.unique(np.concatenate(out))

    # -- fiber maps ------------------------------------------------------
    def _fiber_map(self, g: np.ndarray, lo: int, hi: int, y: int) -> _AffineMap:
        a = self.filt.induced(g)
        mat = a[lo:hi, lo:hi]
        if hi < self.n:
            ydig = self.coder.decode(np.array(y, dtype=np.int64), self.n - hi)
            const = ffla.matvec(a[lo:hi, hi:], ydig, self.field)
        else:
            const = np.zeros(hi - lo, dtype=np.int64)
        return _AffineMap(mat, const, self.coder)

    def _image_digits(self, g: np.ndarray, lo: int, hi: int, z: int) -> int:
        """Fiber coordinates of (point z of V/W_lo) acted on by g."""
        digs = np.zeros(self.n, dtype=np.int64)
        digs[lo:] = self.coder.decode(np.array(z, dtype=np.int64), self.n - lo)
        v = ffla.matvec(self.filt.adapted_t, digs, self.field)
        s = symspace.sym_matrix(g, self.basis, self.field)
        w = ffla.matvec(s, v, self.field)
        c = ffla.matvec(self.filt.to_adapted[lo:hi], w, self.field)
        return int(self.coder.encode(c))

    def _maps(self, state: _GroupState, lo: int, hi: int, y: int) -> tuple[list[_AffineMap], list[int]]:
        maps, used = [], []
        for i, g in enumerate(state.mats):
            mp = self._fiber_map(g, lo, hi, y)
            if not mp.trivial:
                maps.append(mp)
                used.append(i)
        return maps, used

    # -- stabilizers -----------------------------------------------------
    def _stabilizer(self, state: _GroupState, target: int, lo: int, hi: int, y: int, u: int,
                    locate, parent: np.ndarray, label: np.ndarray, used: list[int],
                    rng: np.random.Generator) -> _GroupState:
        """Stabilizer of the fiber point ``u`` (a tree root) inside ``state``.

        Uniform random elements g of the parent group are pulled back into the
        stabilizer as ``g * T(u.g)^-1`` with T read off the BFS tree; the loop
        stops when the known order |G_y| / |orbit| is reached.
        """
        z = y * self.q ** (hi - lo) + u
        m = self.group.m
        bs = permgroup.BSGS(permgroup.degree(m, self.q), [self.q ** j - 1 for j in range(m)])
        parent_bs = state.bsgs()
        gen_perms = [state.perms[i] for i in used]
        inv_cache: dict[tuple[int, ...], np.ndarray] = {}
        stalls = 0
        while bs.order() < target:
            gp = parent_bs.random_element(rng)
            g = permgroup.perm_to_matrix(gp, m, self.field)
            img = locate(self._image_digits(g, lo, hi, z))
            word = tuple(_path_word(img, parent, label))
            t_inv = inv_cache.get(word)
            if t_inv is None:
                t = np.arange(len(gp), dtype=np.int64)
                for lab in word:
                    t = t[gen_perms[lab]]
                t_inv = permgroup.perm_inverse(t)
                inv_cache[word] = t_inv
            if bs.add(gp[t_inv]):
                stalls = 0
            else:
                stalls += 1
                if stalls > 2000:
                    raise RuntimeError("stabilizer computation stalled")
            if bs.order() > target:
                raise RuntimeError("stabilizer larger than orbit-stabilizer allows")
        mats = [permgroup.perm_to_matrix(p, m, self.field) for p in bs.generators()]
        return _GroupState(mats, target, self.field, m, bs)

    # -- enumeration -----------------------------------------------------
    def iter_records(self, with_generators: bool = True, top_points: np.ndarray | None = None
                     ) -> Iterator[OrbitRecord]:
        """All orbits, in increasing canonical order, with stabilizers."""
        yield from self._descend(0, 0, self._top_state, with_generators, top_points)

    def iter_tasks(self, with_generators: bool = True, top_points: np.ndarray | None = None,
                   depth: int = 1):
        """Independent work items, in canonical order.

        The tree is expanded down to ``depth`` levels (capped so the last level
        is never deferred); every orbit found there becomes a ``SubtreeTask``
        for ``run_task``.  With a single level the records themselves come out.
        """
        depth = max(1, min(depth, len(self.levels) - 1))
        yield from self._descend(0, 0, self._top_state, with_generators, top_points, defer=depth)

    def run_task(self, task: "SubtreeTask", with_generators: bool = True) -> list[OrbitRecord]:
        state = _GroupState(task.mats, task.order, self.field, self.group.m)
        return list(self._descend(task.level, task.z, state, with_generators, None))

    def _descend(self, li: int, y: int, state: _GroupState, with_generators: bool,
                 points: np.ndarray | None, defer: int = 0) -> Iterator[OrbitRecord]:
        lo, hi = self.levels[li]
        k = hi - lo
        size = self.q ** k
        last = li == len(self.levels) - 1
        if points is None and size > FIBER_THRESHOLD:
            raise ValueError(f"fiber of {size} points exceeds the enumeration threshold")
        maps, used = self._maps(state, lo, hi, y) if state.order > 1 else ([], [])
        if points is None:
            n = size
            images = [mp.apply(np.arange(n, dtype=np.int64)) for mp in maps]
            codes = None
        else:
            codes = np.asarray(points, dtype=np.int64)
            n = codes.size
            images = []
            for mp in maps:
                img = mp.apply(codes)
                pos = np.searchsorted(codes, img)
                pos = np.minimum(pos, n - 1)
                if not np.array_equal(codes[pos], img):
                    raise ValueError("point set is not stable under the group")
                images.append(pos)
        if codes is None:
            def locate(c):
                return c
        else:
            def locate(c):
                return int(np.searchsorted(codes, c))
        part = _partition(n, images)
        self.stats.fibers += 1
        self.stats.points += n
        self.stats.fiber_work += state.order * len(part.reps)
        self.stats.per_level[li] += len(part.reps)
        need = [(r, s) for r, s in zip(part.reps, part.sizes) if 1 < s < state.order]
        if need and (with_generators or not last):
            parent, label = _bfs_forest(n, np.array([r for r, _ in need], dtype=np.int64), images)
        for r, s in zip(part.reps.tolist(), part.sizes.tolist()):
            if state.order % s:
                raise AssertionError("orbit size does not divide the group order")
            stab_order = state.order // s
            u = int(codes[r]) if codes is not None else r
            z = y * size + u
            if stab_order == 1:
                child = _GroupState([], 1, self.field, self.group.m)
            elif s == 1:
                child = state
            elif last and not with_generators:
                child = None
            else:
                rng = np.random.default_rng([self.seed, li, z & 0x7FFFFFFFFFFFFFFF])
                child = self._stabilizer(state, stab_order, lo, hi, y, u, locate, parent, label, used, rng)
            if last:
                gens = child.mats if (with_generators and child is not None) else []
                yield OrbitRecord(self.form_of(z * self.q ** lo), list(gens), stab_order,
                                  self.group.order // stab_order, z)
            elif defer and li + 1 >= defer:
                yield SubtreeTask(z, [np.asarray(g) for g in child.mats], child.order, li + 1)
            else:
                yield from self._descend(li + 1, z, child, with_generators, None, defer)

    # -- canonical forms -------------------------------------------------
    def canonicalize(self, f: Form) -> tuple[int, np.ndarray, _GroupState]:
        """``(canonical code, t, stabilizer)`` with ``act(t, f)`` canonical."""
        m = self.group.m
        t = ffla.identity(m)
        code = self.code_of(f)
        state = self._top_state
        for li, (lo, hi) in enumerate(self.levels):
            k = hi - lo
            size = self.q ** k
            z = code // self.q ** lo
            y, u = divmod(z, size)
            if state.order == 1:
                continue
            maps, used = self._maps(state, lo, hi, y)
            if not maps:
                continue
            orbit, parent_of, label_of = _orbit_bfs(u, maps)
            umin = min(orbit)
            word = []
            p = umin
            while p != u:
                word.append(label_of[p])
                p = parent_of[p]
            word.reverse()
            step = ffla.identity(m)
            for lab in word:
                step = ffla.matmul(step, state.mats[used[lab]], self.field)
            t = ffla.matmul(t, step, self.field)
            code = self.code_of(symspace.act(t, f, check=False))
            znew = y * size + umin
            key = (li, znew)
            cached = self._stab_cache.get(key)
            if cached is None:
                stab_order = state.order // len(orbit)
                if stab_order == 1:
                    cached = _GroupState([], 1, self.field, m)
                elif len(orbit) == 1:
                    cached = state
                else:
                    pts = np.array(sorted(orbit), dtype=np.int64)
                    images = [np.searchsorted(pts, mp.apply(pts)) for mp in maps]
                    root = int(np.searchsorted(pts, umin))
                    parent, label = _bfs_forest(len(pts), np.array([root]), images)
                    rng = np.random.default_rng([self.seed, li, znew & 0x7FFFFFFFFFFFFFFF])
                    cached = self._stabilizer(state, stab_order, lo, hi, y, umin,
                                              lambda c: int(np.searchsorted(pts, c)),
                                              parent, label, used, rng)
                if len(self._stab_cache) > 100000:
                    self._stab_cache.clear()
                self._stab_cache[key] = cached
            state = cached
        return code, t, state

    def canonical_form(self, f: Form) -> Form:
        return self.form_of(self.canonicalize(f)[0])

    def stabilizer(self, f: Form) -> tuple[list[np.ndarray], int]:
        code, t, state = self.canonicalize(f)
        if state.order == 1:
            return [], 1
        t_inv = ffla.inverse(t, self.field)
        gens = [ffla.matmul(ffla.matmul(t, s, self.field), t_inv, self.field) for s in state.mats]
        return gens, state.order

    def is_equivalent(self, f1: Form, f2: Form) -> np.ndarray | None:
        c1, t1, _ = self.canonicalize(f1)
        c2, t2, _ = self.canonicalize(f2)
        if c1 != c2:
            return None
        return ffla.matmul(t1, ffla.inverse(t2, self.field), self.field)


def _orbit_bfs(u: int, maps: list[_AffineMap]) -> tuple[set[int], dict[int, int], dict[int, int]]:
    """Orbit of a single point with a BFS tree rooted at it."""
    seen = {u}
    parent: dict[int, int] = {}
    label: dict[int, int] = {}
    frontier = np.array([u], dtype=np.int64)
    while frontier.size:
        nxt = []
        for gi, mp in enumerate(maps):
            img = mp.apply(frontier)
            new, idx = np.unique(img, return_index=True)
            keep = [i for i, b in enumerate(new.tolist()) if b not in seen]
            if not keep:
                continue
            src = frontier[idx[keep]].tolist()
            for a, b in zip(src, new[keep].tolist()):
                seen.add(b)
                parent[b] = a
                label[b] = gi
            nxt.append(new[keep])
        frontier = np.concatenate(nxt) if nxt else np.empty(0, dtype=np.int64)
    return seen, parent, label


# ---------------------------------------------------------------------------
# public operations

def burnside_count(group: GroupSpec, basis: MonomialBasis) -> int:
    """Exact number of orbits on the whole space, zero form included."""
    field = group.field
    n = basis.size
    total = 0
    for cls in group.conjugacy_classes():
        s = symspace.sym_matrix(cls.representative, basis, field)
        fixed = n - ffla.rank(field.sub(s, ffla.identity(n)), field)
        total += cls.size * field.q ** fixed
    if total % group.order:
        raise ArithmeticError("orbit count is not an integer; the class data is inconsistent")
    return total // group.order


def orbit_partition_naive(group: GroupSpec, patch: AffinePatch,
                          threshold: int = NAIVE_THRESHOLD) -> list[OrbitRecord]:
    """Ground-truth partition of a G-stable patch by closure under generators."""
    if patch.size > threshold:
        raise ValueError(f"patch of {patch.size} points exceeds the threshold {threshold}")
    basis = patch.base.basis
    field = patch.base.field
    engine = OrbitEngine(group, Filtration.trivial(basis, field))
    if patch.direction.dim == patch.direction.n:
        return list(engine.iter_records(True))
    return list(engine.iter_records(True, engine.patch_codes(patch, 0)))


def orbits_filtration(group: GroupSpec, patch: AffinePatch | None, filtration: Filtration,
                      with_generators: bool = True, engine: OrbitEngine | None = None) -> list[OrbitRecord]:
    return list(iter_orbits_filtration(group, patch, filtration, with_generators, engine))


def iter_orbits_filtration(group: GroupSpec, patch: AffinePatch | None, filtration: Filtration,
                           with_generators: bool = True, engine: OrbitEngine | None = None
                           ) -> Iterator[OrbitRecord]:
    """Orbit representatives with stabilizers, lifted through the filtration."""
    engine = engine or OrbitEngine(group, filtration)
    if patch is None or patch.direction.dim == patch.direction.n:
        yield from engine.iter_records(with_generators)
        return
    top = filtration.subspaces[-1] if filtration.subspaces else None
    if top is not None and not patch.direction.contains_subspace(top):
        raise ValueError("patch is not a union of cosets of the last filtration step")
    lo = filtration.dims[-2]
    if engine.q ** (engine.n - lo) > NAIVE_THRESHOLD:
        raise ValueError("top quotient too large to enumerate")
    yield from engine.iter_records(with_generators, engine.patch_codes(patch, lo))


def stabilizer(f: Form, filtration: Filtration, group: GroupSpec,
               engine: OrbitEngine | None = None) -> tuple[list[np.ndarray], int]:
    engine = engine or OrbitEngine(group, filtration)
    return engine.stabilizer(f)


def is_equivalent(f1: Form, f2: Form, filtration: Filtration, group: GroupSpec,
                  engine: OrbitEngine | None = None) -> np.ndarray | None:
    """Some g with act(g, f1) == f2, or None."""
    if f1.basis != f2.basis or f1.field != f2.field:
        raise ValueError("forms live in different spaces")
    engine = engine or OrbitEngine(group, filtration)
    return engine.is_equivalent(f1, f2)


def expected_stabilizer(records, group_order: int, set_size: int) -> Fraction:
    """Average stabilizer order over the set, checked against the orbit count."""
    total = 0
    covered = 0
    for r in records:
        total += r.stabilizer_order * r.orbit_size
        covered += r.orbit_size
    if covered != set_size:
        raise ValueError(f"records cover {covered} points, expected {set_size}")
    e = Fraction(total, set_size)
    if e * set_size / group_order != len(records):
        raise ValueError("orbit count identity violated")
    return e


# ---------------------------------------------------------------------------
# OCF1 orbit files
#
# Header: magic b"OCF1", then little-endian uint32 m, d, q and uint64 record
# count.  Per record: the coefficient vector as a little-endian integer
# sum c_i q^i in a fixed number of bytes, the stabilizer order (uint64), a
# uint32 generator count and each generator as sum g[i, j] q^(i m + j).

OCF_MAGIC = b"OCF1"
_HEADER = struct.Struct("<4sIIIQ")


def _width(q: int, n: int) -> int:
    return max(1, ((q ** n - 1).bit_length() + 7) // 8)


def _pack_digits(digits, q: int, width: int) -> bytes:
    value = 0
    for c in reversed([int(x) for x in digits]):
        value = value * q + c
    return value.to_bytes(width, "little")


def _unpack_digits(raw: bytes, q: int, n: int) -> list[int]:
    value = int.from_bytes(raw, "little")
    out = []
    for _ in range(n):
        value, c = divmod(value, q)
        out.append(c)
    return out


class OrbitFileWriter:
    """Streaming OCF1 writer; the record count is patched in on close.

    With ``path=None`` it only packs records (no file is opened).
    """

    def __init__(self, path, basis: MonomialBasis, field: FieldDesc):
        self.basis = basis
        self.field = field
        self.count = 0
        self._cw = _width(field.q, basis.size)
        self._gw = _width(field.q, basis.m * basis.m)
        self._fh = None
        if path is not None:
            self._fh = open(path, "wb")
            self._fh.write(_HEADER.pack(OCF_MAGIC, basis.m, basis.d, field.q, 0))

    def pack(self, rec: OrbitRecord) -> bytes:
        q = self.field.q
        if rec.stabilizer_order >= 1 << 64:
            raise OverflowError("stabilizer order does not fit in 64 bits")
        parts = [_pack_digits(rec.representative.coeffs, q, self._cw),
                 struct.pack("<QI", rec.stabilizer_order, len(rec.stabilizer_generators))]
        for g in rec.stabilizer_generators:
            parts.append(_pack_digits(np.asarray(g).reshape(-1), q, self._gw))
        return b"".join(parts)

    def write(self, rec: OrbitRecord) -> None:
        self.write_packed(self.pack(rec))

    def write_packed(self, raw: bytes) -> None:
        self._fh.write(raw)
        self.count += 1

    def close(self) -> None:
        if self._fh is None or self._fh.closed:
            return
        self._fh.flush()
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(OCF_MAGIC, self.basis.m, self.basis.d, self.field.q, self.count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def header_bytes(basis: MonomialBasis, field: FieldDesc, count: int) -> bytes:
    return _HEADER.pack(OCF_MAGIC, basis.m, basis.d, field.q, count)


def read_orbit_header(path) -> tuple[int, int, int, int]:
    with open(path, "rb") as fh:
        magic, m, d, q, count = _HEADER.unpack(fh.read(_HEADER.size))
    if magic != OCF_MAGIC:
        raise ValueError(f"{path}: not an OCF1 file")
    return m, d, q, count


def read_orbit_file(path, group_order: int | None = None) -> Iterator[OrbitRecord]:
    """Records of an OCF1 file; orbit sizes use ``group_order`` (default |GL_m(F_q)|)."""
    m, d, q, count = read_orbit_header(path)
    basis = symspace.monomials(m, d)
    field = ffla.field_of_size(q)
    order = group_order or ffla.gl_order(m, q)
    cw, gw = _width(q, basis.size), _width(q, m * m)
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        for _ in range(count):
            coeffs = _unpack_digits(fh.read(cw), q, basis.size)
            stab, ngens = struct.unpack("<QI", fh.read(12))
            gens = [np.array(_unpack_digits(fh.read(gw), q, m * m), dtype=np.int64).reshape(m, m)
                    for _ in range(ngens)]
            yield OrbitRecord(Form(basis, field, tuple(coeffs)), gens, stab, order // stab)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after {count} records")


def write_orbit_file(path, records, basis: MonomialBasis, field: FieldDesc) -> int:
    with OrbitFileWriter(path, basis, field) as w:
        for rec in records:
            w.write(rec)
    return w.count

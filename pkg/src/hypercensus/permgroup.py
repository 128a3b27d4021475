"""Permutation-group backbone for matrix groups over small fields.

A matrix group acts faithfully on the nonzero vectors of F_q^m.  Point ``i``
is the vector whose base-q digits spell ``i + 1``.  Permutations are numpy
int arrays; ``a[b]`` is the permutation of the matrix product ``a @ b``.

The base/strong-generating-set code is a plain Schreier-Sims: deterministic
when the group order is unknown, randomized (and then certified by reaching
the known order) otherwise.
"""

from __future__ import annotations

import functools

import numpy as np

from .ffla import FieldDesc


@functools.lru_cache(maxsize=None)
def _vector_table(m: int, q: int) -> np.ndarray:
    """Digits of every nonzero vector, row i <-> point i."""
    n = q ** m - 1
    idx = np.arange(1, n + 1, dtype=np.int64)
    out = np.zeros((n, m), dtype=np.int64)
    for j in range(m):
        out[:, j] = idx % q
        idx //= q
    out.setflags(write=False)
    return out


def degree(m: int, q: int) -> int:
    return q ** m - 1


def matrix_to_perm(g: np.ndarray, field: FieldDesc) -> np.ndarray:
    g = np.asarray(g, dtype=np.int64)
    m = g.shape[0]
    vecs = _vector_table(m, field.q)
    if field.e == 1:
        img = (vecs @ g.T) % field.p
    else:
        img = np.zeros_like(vecs)
        for k in range(m):
            img = field.add(img, field.mul(vecs[:, k:k + 1], g[:, k][None, :]))
    weights = field.q ** np.arange(m, dtype=np.int64)
    return img @ weights - 1


def perm_to_matrix(p: np.ndarray, m: int, field: FieldDesc) -> np.ndarray:
    vecs = _vector_table(m, field.q)
    g = np.zeros((m, m), dtype=np.int64)
    for j in range(m):
        g[:, j] = vecs[int(p[field.q ** j - 1])]
    return g


def perm_inverse(p: np.ndarray) -> np.ndarray:
    inv = np.empty_like(p)
    inv[p] = np.arange(len(p), dtype=p.dtype)
    return inv


def is_identity(p: np.ndarray) -> bool:
    return bool(np.array_equal(p, np.arange(len(p))))


class BSGS:
    """Base and strong generating set built by sifting."""

    def __init__(self, n: int, base_hint=()):
        self.n = n
        self.identity = np.arange(n, dtype=np.int64)
        self.base: list[int] = []
        self.strong: list[list[np.ndarray]] = []
        self.trans: list[dict[int, np.ndarray]] = []
        self._hint = list(base_hint)

    # -- structure -------------------------------------------------------
    def order(self) -> int:
        out = 1
        for t in self.trans:
            out *= len(t)
        return out

    def _new_level(self, g: np.ndarray) -> None:
        moved = np.flatnonzero(g != self.identity)
        point = next((b for b in self._hint if b not in self.base and g[b] != b), int(moved[0]))
        self.base.append(point)
        self.strong.append([])
        self.trans.append({point: self.identity})

    def _orbit(self, level: int) -> None:
        b = self.base[level]
        trans = self.trans[level]
        gens = self.strong[level]
        queue = list(trans)
        while queue:
            pt = queue.pop()
            u = trans[pt]
            for s in gens:
                nxt = int(s[pt])
                if nxt not in trans:
                    trans[nxt] = s[u]
                    queue.append(nxt)
        assert b in trans

    def sift(self, g: np.ndarray) -> tuple[np.ndarray, int]:
        for i, b in enumerate(self.base):
            pt = int(g[b])
            u = self.trans[i].get(pt)
            if u is None:
                return g, i
            g = perm_inverse(u)[g]
        return g, len(self.base)

    def contains(self, g: np.ndarray) -> bool:
        h, lvl = self.sift(np.asarray(g, dtype=np.int64))
        return lvl == len(self.base) and is_identity(h)

    def add(self, g: np.ndarray) -> bool:
        """Sift ``g``; extend the structure with its residue.  True if it grew."""
        h, lvl = self.sift(np.asarray(g, dtype=np.int64))
        if lvl == len(self.base):
            if is_identity(h):
                return False
            self._new_level(h)
        for j in range(lvl + 1):
            if j >= len(self.strong):
                break
            self.strong[j].append(h)
            self._orbit(j)
        return True

    def random_element(self, rng: np.random.Generator) -> np.ndarray:
        g = self.identity
        for t in reversed(self.trans):
            keys = list(t)
            u = t[keys[int(rng.integers(len(keys)))]]
            g = u[g]
        return g

    def elements(self):
        """Every group element, once each."""
        def rec(level, acc):
            if level < 0:
                yield acc
                return
            for u in self.trans[level].values():
                yield from rec(level - 1, u[acc])
        yield from rec(len(self.trans) - 1, self.identity)

    def generators(self) -> list[np.ndarray]:
        return list(self.strong[0]) if self.strong else []

    # -- construction ----------------------------------------------------
    def schreier_sims(self) -> None:
        """Deterministic completion: every Schreier generator sifts."""
        changed = True
        while changed:
            changed = False
            for i in range(len(self.base) - 1, -1, -1):
                trans = self.trans[i]
                for pt, u in list(trans.items()):
                    for s in list(self.strong[i]):
                        img = int(s[pt])
                        sg = perm_inverse(trans[img])[s[u]]
                        if self.add(sg):
                            changed = True
                            break
                    if changed:
                        break
                if changed:
                    break


def build_bsgs(perms, n: int, order: int | None = None, rng: np.random.Generator | None = None,
               base_hint=(), max_rounds: int = 100000) -> BSGS:
    """BSGS for the group generated by ``perms``.

    With ``order`` given the structure is built from random elements until it
    reaches that order (which certifies it).  Without it, the deterministic
    Schreier-Sims completion is run.
    """
    bs = BSGS(n, base_hint)
    gens = [np.asarray(p, dtype=np.int64) for p in perms]
    for g in gens:
        bs.add(g)
    if order is None:
        bs.schreier_sims()
        return bs
    if bs.order() == order:
        return bs
    rng = rng or np.random.default_rng(12345)
    pool = _ProductReplacement(gens, n, rng)
    for _ in range(max_rounds):
        bs.add(pool.next())
        got = bs.order()
        if got == order:
            return bs
        if got > order:
            raise ValueError(f"group order {got} is incompatible with expected {order}")
    raise RuntimeError(f"randomized Schreier-Sims stalled at order {bs.order()} (expected {order})")


class _ProductReplacement:
    def __init__(self, gens, n: int, rng: np.random.Generator, slots: int = 10, warmup: int = 30):
        ident = np.arange(n, dtype=np.int64)
        base = list(gens) or [ident]
        self.state = [base[i % len(base)] for i in range(max(slots, len(base)))]
        self.acc = ident
        self.rng = rng
        for _ in range(warmup):
            self.next()

    def next(self) -> np.ndarray:
        k = len(self.state)
        i, j = self.rng.choice(k, size=2, replace=False) if k > 1 else (0, 0)
        if self.rng.integers(2):
            self.state[i] = self.state[i][self.state[j]]
        else:
            self.state[i] = self.state[j][self.state[i]]
        self.acc = self.acc[self.state[i]]
        return self.acc


def group_order(perms, n: int) -> int:
    return build_bsgs(perms, n).order()

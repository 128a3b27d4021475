"""Compiled inner loops (numba)."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def gf2_rank_words(a):
    """Rank of a GF(2) matrix given as rows of uint64 words.  Destroys ``a``."""
    nrows, nwords = a.shape
    rank = 0
    for w in range(nwords):
        for b in range(64):
            if rank == nrows:
                return rank
            bit = np.uint64(1) << np.uint64(b)
            piv = -1
            for i in range(rank, nrows):
                if a[i, w] & bit:
                    piv = i
                    break
            if piv < 0:
                continue
            if piv != rank:
                for j in range(w, nwords):
                    t = a[piv, j]
                    a[piv, j] = a[rank, j]
                    a[rank, j] = t
            for i in range(rank + 1, nrows):
                if a[i, w] & bit:
                    for j in range(w, nwords):
                        a[i, j] ^= a[rank, j]
            rank += 1
    return rank


# ---------------------------------------------------------------------------
# arithmetic in F_{2^k} through exp/log tables.  ``exp`` must repeat its
# period at least seven times so that sums of logs index it without reduction.

@njit(cache=True, inline="always")
def _mul(x, y, exp, log, qm1):
    if x == 0 or y == 0:
        return 0
    return exp[log[x] + log[y]]


@njit(cache=True, inline="always")
def _div(x, y, exp, log, qm1):
    if x == 0:
        return 0
    return exp[log[x] - log[y] + qm1]


@njit(cache=True)
def _eval_terms(terms, nterm, vals, logs, exp, qm1):
    """XOR of the monomials (F_2 coefficients) at a point given by values and logs."""
    acc = 0
    nv = terms.shape[1]
    for t in range(nterm):
        e = 0
        zero = False
        for v in range(nv):
            k = terms[t, v]
            if k:
                if vals[v] == 0:
                    zero = True
                    break
                e += k * logs[v]
        if not zero:
            acc ^= exp[e]
    return acc


@njit(cache=True)
def _conic_points(a, b, c, d, e, f, q, exp, log, trace, qm1):
    ee = _mul(e, e, exp, log, qm1)
    dd = _mul(d, d, exp, log, qm1)
    disc = _mul(a, ee, exp, log, qm1) ^ _mul(_mul(b, b, exp, log, qm1), f, exp, log, qm1) \
        ^ _mul(c, dd, exp, log, qm1) ^ _mul(b, _mul(d, e, exp, log, qm1), exp, log, qm1)
    if disc != 0:
        return q + 1
    if b == 0 and d == 0 and e == 0:
        if a == 0 and c == 0 and f == 0:
            return q * q + q + 1
        return q + 1
    if b != 0:
        t = trace[_div(_mul(a, c, exp, log, qm1), _mul(b, b, exp, log, qm1), exp, log, qm1)]
    elif d != 0:
        t = trace[_div(_mul(a, f, exp, log, qm1), dd, exp, log, qm1)]
    else:
        t = trace[_div(_mul(c, f, exp, log, qm1), ee, exp, log, qm1)]
    if t == 0:
        return 2 * q + 1
    return 1


@njit(cache=True)
def _cubic_roots(c0, c1, c2, c3, out, exp, log, qm1, sqrt_t, wroots, nw, croots, ncr, asroots, nas):
    """Distinct roots of c3 s^3 + c2 s^2 + c1 s + c0 in F_q; -1 if the polynomial is zero."""
    if c3 != 0:
        a2 = _div(c2, c3, exp, log, qm1)
        a1 = _div(c1, c3, exp, log, qm1)
        a0 = _div(c0, c3, exp, log, qm1)
        pp = a1 ^ _mul(a2, a2, exp, log, qm1)
        rr = a0 ^ _mul(a1, a2, exp, log, qm1)
        n = 0
        if pp == 0:
            if rr == 0:
                out[0] = a2
                return 1
            for i in range(ncr[rr]):
                out[n] = croots[rr, i] ^ a2
                n += 1
            return n
        sp = sqrt_t[pp]
        r = _div(rr, _mul(pp, sp, exp, log, qm1), exp, log, qm1)
        for i in range(nw[r]):
            out[n] = _mul(sp, wroots[r, i], exp, log, qm1) ^ a2
            n += 1
        return n
    if c2 != 0:
        if c1 == 0:
            out[0] = sqrt_t[_div(c0, c2, exp, log, qm1)]
            return 1
        scale = _div(c1, c2, exp, log, qm1)
        r = _div(_mul(c0, c2, exp, log, qm1), _mul(c1, c1, exp, log, qm1), exp, log, qm1)
        n = 0
        for i in range(nas[r]):
            out[n] = _mul(scale, asroots[r, i], exp, log, qm1)
            n += 1
        return n
    if c1 != 0:
        out[0] = _div(c0, c1, exp, log, qm1)
        return 1
    if c0 != 0:
        return 0
    return -1


@njit(cache=True)
def fiber_sum(k, q, exp, log, trace, sqr, sqrt_t, wroots, nw, croots, ncr, asroots, nas,
              dterms, dcnt, cterms, ccnt, with_fibers):
    """Sum over lines through e3 = (0:0:0:1) in P^3(F_q).

    The lines are indexed by (a:b:c) in P^2(F_q); on each, the form whose pieces
    are ``dterms[j]`` (coefficient of s^j) is restricted to (a, b, c, s).  Returns
    (number of roots, sum of conic fiber counts over the roots).  Frobenius
    orbits of lines are visited once and weighted by their size; ``k`` is kept
    in the signature for the callers' benefit.
    """
    qm1 = q - 1
    n_roots = 0
    fib = 0
    vals3 = np.zeros(3, dtype=np.int64)
    logs3 = np.zeros(3, dtype=np.int64)
    vals4 = np.zeros(4, dtype=np.int64)
    logs4 = np.zeros(4, dtype=np.int64)
    roots = np.zeros(3, dtype=np.int64)
    coef = np.zeros(4, dtype=np.int64)
    cv = np.zeros(6, dtype=np.int64)
    seen0 = np.zeros((q * q + 63) // 64, dtype=np.uint64)
    seen1 = np.zeros((q + 63) // 64, dtype=np.uint64)
    for pivot in range(3):
        n1 = q if pivot == 0 else 1
        n2 = q if pivot <= 1 else 1
        for u in range(n1):
            for v in range(n2):
                if pivot == 0:
                    x0, x1, x2 = 1, u, v
                    key = u * q + v
                elif pivot == 1:
                    x0, x1, x2 = 0, 1, v
                    key = v
                else:
                    x0, x1, x2 = 0, 0, 1
                    key = 0
                # Frobenius orbit: the first member met in this order is the least
                if pivot == 2:
                    size = 1
                else:
                    if pivot == 0:
                        bitmap = seen0
                    else:
                        bitmap = seen1
                    if (bitmap[key >> 6] >> np.uint64(key & 63)) & np.uint64(1):
                        continue
                    size = 0
                    uu, vv = u, v
                    while True:
                        kk = uu * q + vv if pivot == 0 else vv
                        if (bitmap[kk >> 6] >> np.uint64(kk & 63)) & np.uint64(1):
                            break
                        bitmap[kk >> 6] |= np.uint64(1) << np.uint64(kk & 63)
                        size += 1
                        uu = sqr[uu]
                        vv = sqr[vv]
                vals3[0] = x0
                vals3[1] = x1
                vals3[2] = x2
                for i in range(3):
                    logs3[i] = log[vals3[i]] if vals3[i] else 0
                for j in range(4):
                    coef[j] = _eval_terms(dterms[j], dcnt[j], vals3, logs3, exp, qm1)
                nr = _cubic_roots(coef[0], coef[1], coef[2], coef[3], roots, exp, log, qm1,
                                  sqrt_t, wroots, nw, croots, ncr, asroots, nas)
                local_roots = 0
                local_fib = 0
                if nr < 0:
                    local_roots = q
                    if with_fibers:
                        for s in range(q):
                            vals4[0] = x0
                            vals4[1] = x1
                            vals4[2] = x2
                            vals4[3] = s
                            for i in range(4):
                                logs4[i] = log[vals4[i]] if vals4[i] else 0
                            for j in range(6):
                                cv[j] = _eval_terms(cterms[j], ccnt[j], vals4, logs4, exp, qm1)
                            local_fib += _conic_points(cv[0], cv[1], cv[2], cv[3], cv[4], cv[5],
                                                       q, exp, log, trace, qm1)
                else:
                    local_roots = nr
                    if with_fibers:
                        for r in range(nr):
                            vals4[0] = x0
                            vals4[1] = x1
                            vals4[2] = x2
                            vals4[3] = roots[r]
                            for i in range(4):
                                logs4[i] = log[vals4[i]] if vals4[i] else 0
                            for j in range(6):
                                cv[j] = _eval_terms(cterms[j], ccnt[j], vals4, logs4, exp, qm1)
                            local_fib += _conic_points(cv[0], cv[1], cv[2], cv[3], cv[4], cv[5],
                                                       q, exp, log, trace, qm1)
                n_roots += size * local_roots
                fib += size * local_fib
    return n_roots, fib


@njit(cache=True)
def count_zeros_p3(q, exp, log, terms, nterm, cterms, ccnt, with_fibers, trace):
    """Brute force over P^3(F_q): (points of Z(form), fiber sum over them)."""
    qm1 = q - 1
    vals = np.zeros(4, dtype=np.int64)
    logs = np.zeros(4, dtype=np.int64)
    cv = np.zeros(6, dtype=np.int64)
    npts = 0
    fib = 0
    for pivot in range(4):
        free = 3 - pivot
        total = 1
        for _ in range(free):
            total *= q
        for idx in range(total):
            for i in range(4):
                vals[i] = 0
            vals[pivot] = 1
            t = idx
            for i in range(pivot + 1, 4):
                vals[i] = t % q
                t //= q
            for i in range(4):
                logs[i] = log[vals[i]] if vals[i] else 0
            if _eval_terms(terms, nterm, vals, logs, exp, qm1) == 0:
                npts += 1
                if with_fibers:
                    for j in range(6):
                        cv[j] = _eval_terms(cterms[j], ccnt[j], vals, logs, exp, qm1)
                    fib += _conic_points(cv[0], cv[1], cv[2], cv[3], cv[4], cv[5], q, exp, log, trace, qm1)
    return npts, fib

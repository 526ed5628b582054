"""Compiled inner loops of the walk simulator.

Every kernel consumes uniform 32-bit halves of a buffer of 64-bit random
words (low half first) and steps right when the half is below the site's
threshold ``floor(omega * 2**32)``.  Kernels are resumable: they return a
status code together with their state, and the caller refills the random
buffer or widens the environment before calling again.
"""

import numpy as np
from numba import njit

DONE = 0
NEED_BITS = 1
NEED_EXTEND = 2
HIT = 3
VIOLATION = 4
OVERFLOW = 5
CAPPED = 6
CERTIFIED = 7

SIGN = 0
POWER = 1
POWER_LOG = 2
OPAQUE = 3

_LIMIT = 1 << 62
_CHECK_MASK = 4095


@njit(cache=True, nogil=True, inline="always")
def _half(words, cursor):
    w = words[cursor >> 1]
    if cursor & 1:
        return w >> np.uint64(32)
    return w & np.uint64(0xFFFFFFFF)


@njit(cache=True, nogil=True)
def walk_span(thr, offset, words, cursor, pos, t, n_stop, target, lt, first, path):
    """Advance until time ``n_stop`` or until ``target`` is visited."""
    n_words2 = 2 * words.size
    last = thr.size - 1
    record = path.size > 0
    while True:
        if pos == target:
            return HIT, cursor, pos, t
        if t >= n_stop:
            return DONE, cursor, pos, t
        j = pos - offset
        if j == 0 or j == last:
            return NEED_EXTEND, cursor, pos, t
        if cursor >= n_words2:
            return NEED_BITS, cursor, pos, t
        if _half(words, cursor) < thr[j]:
            pos += 1
        else:
            pos -= 1
        cursor += 1
        t += 1
        k = pos - offset
        lt[k] += 1
        if first[k] < 0:
            first[k] = t
        if record:
            path[t] = pos


@njit(cache=True, nogil=True)
def exit_batch(thr, offset, words, cursor, start, p, r, i, pos, t, cap, sides, times, lt):
    """Run walks ``i, i+1, ...`` from ``start`` until each hits ``p`` or ``r``.

    ``lt[i, x - p - 1]`` counts visits to site ``x`` including time 0; the
    caller records the time-0 visit of the first walk it hands over.
    """
    n = sides.size
    n_words2 = 2 * words.size
    col0 = p + 1
    while i < n:
        if cursor >= n_words2:
            return NEED_BITS, cursor, i, pos, t
        if _half(words, cursor) < thr[pos - offset]:
            pos += 1
        else:
            pos -= 1
        cursor += 1
        t += 1
        if pos == p or pos == r:
            sides[i] = pos == r
            times[i] = t
            i += 1
            if i < n:
                pos = start
                t = 0
                lt[i, start - col0] += 1
        else:
            lt[i, pos - col0] += 1
            if t >= cap:
                return CAPPED, cursor, i, pos, t
    return DONE, cursor, i, pos, t


@njit(cache=True, nogil=True)
def abs_f_neg(y, kind, alpha):
    """``|f(-y)|`` for ``y >= 1`` in the shipped monotone families."""
    if kind == SIGN:
        return 1.0
    if kind == POWER:
        return y**alpha
    if kind == POWER_LOG:
        return y ** (np.log(2.0 + y) ** alpha)
    return np.inf


@njit(cache=True, nogil=True)
def worst_drop(m, pos, kind, alpha):
    """Largest possible decrease of the running sum over ``m`` more steps from ``pos``.

    Positive sites add at least 0; the walk needs ``pos`` steps to leave the
    positive half-line, and every later site has modulus at most ``a + L``.
    """
    if pos >= 0:
        a = 0
        L = m - pos
    else:
        a = -pos
        L = m
    if L <= 0:
        return 0.0
    return L * abs_f_neg(float(a + L), kind, alpha)


@njit(cache=True, nogil=True)
def persist_int(thr, offset, fv, words, cursor, pos, t, s, u, N, kind, alpha):
    """Integer running sum; stops at the first ``n`` with sum ``<= u``."""
    n_words2 = 2 * words.size
    last = thr.size - 1
    while t < N:
        if (t & _CHECK_MASK) == 0 and kind != OPAQUE:
            if s - worst_drop(N - t, pos, kind, alpha) > u:
                return CERTIFIED, cursor, pos, t, s
        j = pos - offset
        if j == 0 or j == last:
            return NEED_EXTEND, cursor, pos, t, s
        if cursor >= n_words2:
            return NEED_BITS, cursor, pos, t, s
        if _half(words, cursor) < thr[j]:
            pos += 1
        else:
            pos -= 1
        cursor += 1
        t += 1
        s += fv[pos - offset]
        if s <= u:
            return VIOLATION, cursor, pos, t, s
        if s > _LIMIT:
            return OVERFLOW, cursor, pos, t, s
    return DONE, cursor, pos, t, s


@njit(cache=True, nogil=True)
def persist_float(thr, offset, fv, words, cursor, pos, t, s, c, u, N, kind, alpha):
    """Compensated (Kahan) running sum; otherwise as :func:`persist_int`."""
    n_words2 = 2 * words.size
    last = thr.size - 1
    while t < N:
        if (t & _CHECK_MASK) == 0 and kind != OPAQUE:
            if s - worst_drop(N - t, pos, kind, alpha) > u:
                return CERTIFIED, cursor, pos, t, s, c
        j = pos - offset
        if j == 0 or j == last:
            return NEED_EXTEND, cursor, pos, t, s, c
        if cursor >= n_words2:
            return NEED_BITS, cursor, pos, t, s, c
        if _half(words, cursor) < thr[j]:
            pos += 1
        else:
            pos -= 1
        cursor += 1
        t += 1
        y = fv[pos - offset] - c
        tt = s + y
        c = (tt - s) - y
        s = tt
        if s <= u:
            return VIOLATION, cursor, pos, t, s, c
    return DONE, cursor, pos, t, s, c


@njit(cache=True, nogil=True)
def compensated_cumsum(x):
    out = np.empty(x.size)
    s = 0.0
    c = 0.0
    for k in range(x.size):
        y = x[k] - c
        tt = s + y
        c = (tt - s) - y
        s = tt
        out[k] = s
    return out

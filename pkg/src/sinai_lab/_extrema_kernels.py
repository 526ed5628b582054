"""Compiled kernels for x-extrema.

Kinds are encoded as +1 (maximum) and -1 (minimum).
"""

import heapq

import numpy as np
from numba import njit

MAX = 1
MIN = -1


@njit(cache=True, nogil=True)
def scan(v, x):
    """Left-to-right zigzag construction of the x-extrema of ``v``.

    Returns breakpoint indices, kinds and certification flags of the
    alternating sequence: boundary candidates first and last (uncertified),
    confirmed x-extrema in between (certified), plus a tie flag.
    """
    n = v.size
    idx = np.empty(n + 2, np.int64)
    kinds = np.empty(n + 2, np.int64)
    cert = np.zeros(n + 2, np.bool_)
    cnt = 0
    tie = False
    lo = v[0]
    lo_i = 0
    hi = v[0]
    hi_i = 0
    hi_before_lo = 0
    lo_before_hi = 0
    kind = 0
    cand = 0.0
    cand_i = 0
    i = 1
    # direction unknown until the first rise or fall of size x
    while i < n:
        vi = v[i]
        if vi < lo:
            lo = vi
            lo_i = i
            hi_before_lo = hi_i
        elif vi == lo:
            tie = True
        if vi > hi:
            hi = vi
            hi_i = i
            lo_before_hi = lo_i
        elif vi == hi:
            tie = True
        if vi - lo >= x:
            if lo_i > 0:
                idx[cnt] = hi_before_lo
                kinds[cnt] = MAX
                cnt += 1
            idx[cnt] = lo_i
            kinds[cnt] = MIN
            cnt += 1
            kind = MAX
            cand = vi
            cand_i = i
            break
        if hi - vi >= x:
            if hi_i > 0:
                idx[cnt] = lo_before_hi
                kinds[cnt] = MIN
                cnt += 1
            idx[cnt] = hi_i
            kinds[cnt] = MAX
            cnt += 1
            kind = MIN
            cand = vi
            cand_i = i
            break
        i += 1
    if kind == 0:
        return idx[:0], kinds[:0], cert[:0], tie
    opp = cand
    opp_i = cand_i
    i += 1
    while i < n:
        vi = v[i]
        if kind == MAX:
            if vi > cand:
                cand = vi
                cand_i = i
                opp = vi
                opp_i = i
            else:
                if vi == cand:
                    tie = True
                if cand - vi >= x:
                    idx[cnt] = cand_i
                    kinds[cnt] = MAX
                    cert[cnt] = True
                    cnt += 1
                    kind = MIN
                    cand = vi
                    cand_i = i
                    opp = vi
                    opp_i = i
                elif vi < opp:
                    opp = vi
                    opp_i = i
        else:
            if vi < cand:
                cand = vi
                cand_i = i
                opp = vi
                opp_i = i
            else:
                if vi == cand:
                    tie = True
                if vi - cand >= x:
                    idx[cnt] = cand_i
                    kinds[cnt] = MIN
                    cert[cnt] = True
                    cnt += 1
                    kind = MAX
                    cand = vi
                    cand_i = i
                    opp = vi
                    opp_i = i
                elif vi > opp:
                    opp = vi
                    opp_i = i
        i += 1
    idx[cnt] = cand_i
    kinds[cnt] = kind
    cnt += 1
    if opp_i != cand_i:
        idx[cnt] = opp_i
        kinds[cnt] = -kind
        cnt += 1
    return idx[:cnt], kinds[:cnt], cert[:cnt], tie


@njit(cache=True, nogil=True)
def turning_points(v):
    """Endpoints and strict local extrema; a plateau is represented by its left end."""
    n = v.size
    keep = np.empty(n, np.int64)
    m = 0
    for i in range(n):
        if m == 0 or v[i] != v[keep[m - 1]]:
            keep[m] = i
            m += 1
    out = np.empty(m, np.int64)
    k = 0
    for j in range(m):
        if j == 0 or j == m - 1:
            out[k] = keep[j]
            k += 1
        else:
            a = v[keep[j - 1]]
            b = v[keep[j]]
            c = v[keep[j + 1]]
            if (b > a and b > c) or (b < a and b < c):
                out[k] = keep[j]
                k += 1
    return out[:k]


@njit(cache=True, nogil=True)
def sweep(t, v, c, x_max):
    """Merge slopes in order of increasing height between two walls.

    The window ends act as walls: they are never removed and absorb the
    more extreme value of a same-kind neighbour merged next to them.  A
    point is a certified x-extremum once both its adjacent heights are at
    least x.

    Returns ``(events, sign_c, ok, x0_loc)``.  Each event row describes a
    merge of the slope straddling the origin, i.e. a sign change of the
    valley bottom: ``[X, kind(x0), loc x0, loc x1, loc x_-1, loc x2,
    H(T_-1), H(T_1), x_-1 is a wall, x2 is a wall]``.  ``sign_c`` is the
    kind of ``x0`` at scale ``c`` and ``ok`` tells whether ``x0`` is
    certified at ``x_max`` (or is the left wall next to a certified point).
    """
    tp = turning_points(v)
    m = tp.size
    val = np.empty(m)
    loc = np.empty(m)
    for k in range(m):
        val[k] = v[tp[k]]
        loc[k] = t[tp[k]]
    kind = np.zeros(m, np.int64)
    for k in range(1, m - 1):
        kind[k] = MAX if val[k] > val[k - 1] else MIN
    if m >= 3:
        kind[0] = -kind[1]
        kind[m - 1] = -kind[m - 2]
    else:
        kind[0] = MAX if val[0] > val[m - 1] else MIN
        kind[m - 1] = -kind[0]
    prv = np.arange(-1, m - 1)
    nxt = np.arange(1, m + 1)
    alive = np.ones(m, np.bool_)
    wall = np.zeros(m, np.bool_)
    wall[0] = True
    wall[m - 1] = True
    heap = [(0.0, 0, 0)]
    heap.pop()
    for k in range(1, m - 2):
        heap.append((abs(val[k + 1] - val[k]), k, k + 1))
    heapq.heapify(heap)
    x0 = 0
    for k in range(m):
        if loc[k] <= 0.0:
            x0 = k
    ev = np.empty((m, 10))
    ne = 0
    sign_c = 0
    while len(heap) > 0:
        h, a, b = heapq.heappop(heap)
        if not alive[a] or not alive[b] or nxt[a] != b:
            continue
        if sign_c == 0 and h >= c:
            sign_c = kind[x0]
        if h >= x_max:
            break
        P = prv[a]
        Q = nxt[b]
        if a == x0:
            if h >= c:
                ev[ne, 0] = h
                ev[ne, 1] = kind[a]
                ev[ne, 2] = loc[a]
                ev[ne, 3] = loc[b]
                ev[ne, 4] = loc[P]
                ev[ne, 5] = loc[Q]
                ev[ne, 6] = abs(val[a] - val[P])
                ev[ne, 7] = abs(val[Q] - val[b])
                ev[ne, 8] = wall[P]
                ev[ne, 9] = wall[Q]
                ne += 1
            x0 = P
        elif b == x0:
            x0 = P
        if wall[P]:
            if (kind[P] == MAX and val[b] > val[P]) or (kind[P] == MIN and val[b] < val[P]):
                val[P] = val[b]
                loc[P] = loc[b]
        if wall[Q]:
            if (kind[Q] == MAX and val[a] > val[Q]) or (kind[Q] == MIN and val[a] < val[Q]):
                val[Q] = val[a]
                loc[Q] = loc[a]
        alive[a] = False
        alive[b] = False
        nxt[P] = Q
        prv[Q] = P
        if not wall[P] and not wall[Q]:
            heapq.heappush(heap, (abs(val[Q] - val[P]), P, Q))
    if sign_c == 0:
        sign_c = kind[x0]
    ok = False
    if not wall[x0]:
        ok = abs(val[x0] - val[prv[x0]]) >= x_max and abs(val[nxt[x0]] - val[x0]) >= x_max
    elif x0 == 0 and not wall[nxt[0]]:
        # the left wall stands for an extremum at or beyond it, of known kind
        y = nxt[0]
        ok = abs(val[y] - val[0]) >= x_max and abs(val[nxt[y]] - val[y]) >= x_max
    return ev[:ne], sign_c, ok, loc[x0]

"""Compiled Pareto-front chain DP used inside the set search.

Same recursion as :func:`mvstream.client.chain_front`, on dense arrays:
``seg[i, j]`` is the aggregate distortion a segment (i, j) owns in the
window (NaN where the pair is not a valid segment) and ``endc[i]`` the
closed-end distortion of rep ``i``. Entries live in one pool; an entry's
chain is ``[rep[e]] + chain(nxt[e])`` and ends at ``rep[e] == -1``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _grow(a, size):
    out = np.empty(size, a.dtype)
    out[:a.shape[0]] = a
    return out


@njit(cache=True)
def _prune(cand, m, bw, xx, dd, bw_cap, x_cap):
    keep = np.empty(m, np.int64)
    k = 0
    for t in range(m):
        e = cand[t]
        if bw[e] <= bw_cap and xx[e] <= x_cap:
            keep[k] = e
            k += 1
    keep = keep[:k]
    # order by distortion, then bandwidth, then extra cost (stable passes)
    o = np.argsort(xx[keep], kind="mergesort")
    keep = keep[o]
    o = np.argsort(bw[keep], kind="mergesort")
    keep = keep[o]
    o = np.argsort(dd[keep], kind="mergesort")
    keep = keep[o]
    out = np.empty(k, np.int64)
    n_out = 0
    sb = np.empty(k + 1)
    sx = np.empty(k + 1)
    ns = 0
    for t in range(k):
        e = keep[t]
        b = bw[e]
        x = xx[e]
        p = np.searchsorted(sb[:ns], b, side="right")
        if p > 0 and sx[p - 1] <= x:
            continue
        out[n_out] = e
        n_out += 1
        q = p
        while q < ns and sx[q] >= x:
            q += 1
        # replace sb[p:q] by (b, x)
        shift = q - p - 1
        if shift > 0:
            for r in range(p + 1, ns - shift):
                sb[r] = sb[r + shift]
                sx[r] = sx[r + shift]
            ns -= shift
        elif shift < 0:
            for r in range(ns, p, -1):
                sb[r] = sb[r - 1]
                sx[r] = sx[r - 1]
            ns += 1
        sb[p] = b
        sx[p] = x
    return out[:n_out]


@njit(cache=True)
def front_dp(views, rates, extra, seg, endc, lo, hi, bw_cap, x_cap):
    """Return ``(bw, extra, dist, rep, nxt, front)``; ``front`` indexes the pool."""
    n = views.shape[0]
    cap = 4096
    bw = np.empty(cap)
    xx = np.empty(cap)
    dd = np.empty(cap)
    rep = np.empty(cap, np.int64)
    nxt = np.empty(cap, np.int64)
    size = 0
    fr = np.empty(cap, np.int64)  # concatenated fronts
    fsize = 0
    cont_off = np.zeros(n, np.int64)
    cont_len = np.zeros(n, np.int64)
    done_off = np.zeros(n, np.int64)
    done_len = np.zeros(n, np.int64)
    cand = np.empty(cap, np.int64)

    # view groups, processed right to left
    g_end = n
    while g_end > 0:
        g_start = g_end - 1
        while g_start > 0 and views[g_start - 1] == views[g_end - 1]:
            g_start -= 1
        v = views[g_start]
        for i in range(g_start, g_end):
            m = 0
            for j in range(g_end, n):
                s = seg[i, j]
                if s != s:
                    continue
                for t in range(done_off[j], done_off[j] + done_len[j]):
                    k = fr[t]
                    b = rates[j] + bw[k]
                    x = extra[j] + xx[k]
                    if b > bw_cap or x > x_cap:
                        continue
                    if size >= bw.shape[0]:
                        new = 2 * bw.shape[0]
                        bw = _grow(bw, new)
                        xx = _grow(xx, new)
                        dd = _grow(dd, new)
                        rep = _grow(rep, new)
                        nxt = _grow(nxt, new)
                    bw[size] = b
                    xx[size] = x
                    dd[size] = s + dd[k]
                    rep[size] = j
                    nxt[size] = k
                    if m >= cand.shape[0]:
                        cand = _grow(cand, 2 * cand.shape[0])
                    cand[m] = size
                    m += 1
                    size += 1
            kept = _prune(cand, m, bw, xx, dd, bw_cap, x_cap)
            if fsize + kept.shape[0] > fr.shape[0]:
                fr = _grow(fr, 2 * (fsize + kept.shape[0]))
            fr[fsize:fsize + kept.shape[0]] = kept
            cont_off[i] = fsize
            cont_len[i] = kept.shape[0]
            fsize += kept.shape[0]
        for i in range(g_start, g_end):
            m = 0
            need = 2 + cont_len[i]
            for k2 in range(g_start, g_end):
                need += cont_len[k2]
            if size + need > bw.shape[0]:
                new = 2 * (size + need)
                bw = _grow(bw, new)
                xx = _grow(xx, new)
                dd = _grow(dd, new)
                rep = _grow(rep, new)
                nxt = _grow(nxt, new)
            if cand.shape[0] < need:
                cand = _grow(cand, 2 * need)
            if v > hi:
                bw[size] = 0.0
                xx[size] = 0.0
                dd[size] = 0.0
                rep[size] = -1
                nxt[size] = -1
                cand[m] = size
                m += 1
                size += 1
            else:
                for t in range(cont_off[i], cont_off[i] + cont_len[i]):
                    cand[m] = fr[t]
                    m += 1
                if v == hi:
                    bw[size] = 0.0
                    xx[size] = 0.0
                    dd[size] = endc[i]
                    rep[size] = -1
                    nxt[size] = -1
                    cand[m] = size
                    m += 1
                    size += 1
                # rate switch at this view
                for k2 in range(g_start, g_end):
                    if k2 == i:
                        continue
                    for t in range(cont_off[k2], cont_off[k2] + cont_len[k2]):
                        c = fr[t]
                        bw[size] = rates[k2] + bw[c]
                        xx[size] = extra[k2] + xx[c]
                        dd[size] = dd[c]
                        rep[size] = k2
                        nxt[size] = c
                        cand[m] = size
                        m += 1
                        size += 1
            kept = _prune(cand, m, bw, xx, dd, bw_cap, x_cap)
            if fsize + kept.shape[0] > fr.shape[0]:
                fr = _grow(fr, 2 * (fsize + kept.shape[0]))
            fr[fsize:fsize + kept.shape[0]] = kept
            done_off[i] = fsize
            done_len[i] = kept.shape[0]
            fsize += kept.shape[0]
        g_end = g_start

    m = 0
    for i in range(n):
        if views[i] > lo:
            break
        for t in range(cont_off[i], cont_off[i] + cont_len[i]):
            c = fr[t]
            if size >= bw.shape[0]:
                new = 2 * bw.shape[0]
                bw = _grow(bw, new)
                xx = _grow(xx, new)
                dd = _grow(dd, new)
                rep = _grow(rep, new)
                nxt = _grow(nxt, new)
            bw[size] = rates[i] + bw[c]
            xx[size] = extra[i] + xx[c]
            dd[size] = dd[c]
            rep[size] = i
            nxt[size] = c
            if m >= cand.shape[0]:
                cand = _grow(cand, 2 * cand.shape[0])
            cand[m] = size
            m += 1
            size += 1
    front = _prune(cand, m, bw, xx, dd, bw_cap, x_cap)
    return bw[:size], xx[:size], dd[:size], rep[:size], nxt[:size], front


def chain_of(rep: np.ndarray, nxt: np.ndarray, e: int) -> list[int]:
    out = []
    while e >= 0 and rep[e] >= 0:
        out.append(int(rep[e]))
        e = int(nxt[e])
    return out

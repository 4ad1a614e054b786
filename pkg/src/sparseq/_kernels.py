"""Compiled inner loops shared by every trellis sequence detector.

One kernel covers the full-state detector (trellis memory K equal to the
channel memory L), the reduced-state detector (K < L, remaining taps
cancelled from per-survivor feedback registers), and each subtrellis of the
parallel decomposition (which is just the full-state case on a compressed
tap set).  States pack the last K symbol indices in radix M, least
significant digit first, so transitions are integer shifts.

Branch metrics exploit tap sparsity: in steady state the per-branch
prediction depends only on the symbol digits sitting under nonzero taps,
so the kernel evaluates one residual per distinct tap pattern per step and
the ACS loop does table lookups.

Metric ties are broken toward the lexicographically smallest symbol-index
sequence, decided by comparing the competing survivor prefixes; the
exhaustive reference detector enumerates in the same order, which makes
equivalence tests bit-exact even on crafted ties.

Known framing: symbols before index 0 and after index n_data-1 are zero
amplitude (not an alphabet point).  Feedback registers use the sentinel
index M for those, mapped to 0 by an extended symbol table.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["detector_tables", "trellis_detect", "dfe_detect"]


def detector_tables(M, K, delays, coeffs, symbols):
    """Lookup tables for one detector configuration.

    Splits taps into the new-symbol tap (delay 0), state taps (delay in
    1..K, read from a state digit) and register taps (delay > K, read from
    the survivor feedback register).  Returns

    - ``pat_idx``  int32[S*M]: tap-pattern id of each (state, input) pair,
    - ``pat_yhat`` complex128[P]: noiseless prediction per pattern,
    - ``rt_slot``  int64: register slot of each register tap,
    - ``rt_h``     complex128: coefficient of each register tap.
    """
    delays = np.asarray(delays, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if delays[0] != 0:
        raise ValueError("tap list must start at delay 0")
    symbols = np.asarray(symbols, dtype=np.complex128)
    state = [(int(d), coeffs[g]) for g, d in enumerate(delays) if 1 <= d <= K]
    P = M ** (1 + len(state))
    pid = np.arange(P, dtype=np.int64)
    pat_yhat = coeffs[0] * symbols[pid % M]
    for u, (_, h) in enumerate(state):
        pat_yhat = pat_yhat + h * symbols[(pid // M ** (1 + u)) % M]
    S = M**K
    pj = np.arange(S * M, dtype=np.int64)
    p, j = pj // M, pj % M
    idx = j.copy()
    for u, (d, _) in enumerate(state):
        idx += ((p // M ** (d - 1)) % M) * M ** (1 + u)
    rt = [(int(d) - K - 1, coeffs[g]) for g, d in enumerate(delays) if d > K]
    rt_slot = np.array([s for s, _ in rt], dtype=np.int64)
    rt_h = np.array([h for _, h in rt], dtype=np.complex128)
    return idx.astype(np.int32), pat_yhat.astype(np.complex128), rt_slot, rt_h


@njit(cache=True, nogil=True)
def _lex_less(dec_rec, k, K, M, SM1, a, b, s1, s2):
    # survivor prefix ending at state b strictly lex-smaller than at state a?
    n1 = np.int64(a)
    n2 = np.int64(b)
    for t in range(k - 1, -1, -1):
        s1[t] = n1 % M
        s2[t] = n2 % M
        if t >= K:
            n1 = n1 // M + np.int64(dec_rec[t, n1]) * SM1
            n2 = n2 // M + np.int64(dec_rec[t, n2]) * SM1
        else:
            n1 = n1 // M
            n2 = n2 // M
    for t in range(k):
        if s1[t] != s2[t]:
            return s2[t] < s1[t]
    return False


@njit(cache=True, nogil=True)
def trellis_detect(y, n_data, M, K, symvals, tap_d, tap_h,
                   pat_idx, pat_yhat, rt_slot, rt_h, reg_len):
    """Add-compare-select pass over M**K states, K >= 1.

    ``y`` must hold n_data + tap_d[-1] samples (data plus zero-tail runout);
    ``symvals`` has M+1 entries, the last being the zero-amplitude sentinel.
    Returns decided symbol indices, tail-augmented per-state metrics, the
    winning state and metric, the branch-evaluation count, and the
    backpointer table (for survivor-history reconstruction).
    """
    S = np.int64(1)
    for _ in range(K):
        S *= M
    SM1 = S // M
    n_taps = tap_d.shape[0]
    n_rt = rt_slot.shape[0]
    P = pat_yhat.shape[0]
    L_tail = tap_d[n_taps - 1]

    pw = np.empty(K + 1, np.int64)
    pw[0] = 1
    for i in range(K):
        pw[i + 1] = pw[i] * M

    met_a = np.full(S, np.inf)
    met_b = np.full(S, np.inf)
    met_a[0] = 0.0
    reg_w = reg_len if reg_len > 0 else 1
    reg_a = np.full((S, reg_w), M, np.int8)
    reg_b = np.full((S, reg_w), M, np.int8)
    dec_rec = np.zeros((n_data, S), np.int8)
    s1 = np.empty(n_data, np.int8)
    s2 = np.empty(n_data, np.int8)
    res_pat = np.empty(P, np.complex128)
    bm_pat = np.empty(P, np.float64)
    regdot = np.zeros(S, np.complex128)
    work = np.int64(0)

    # growth phase: at step k only the first M^k states exist, and taps
    # reaching past the block start see zero amplitude
    for k in range(K):
        yk = y[k]
        live = pw[k]
        for p in range(live):
            base = 0.0j
            for g in range(1, n_taps):
                d = tap_d[g]
                if d <= k:
                    base += tap_h[g] * symvals[(p // pw[d - 1]) % M]
            mp = met_a[p]
            for j in range(M):
                e = yk - base - tap_h[0] * symvals[j]
                met_b[j + p * M] = mp + e.real * e.real + e.imag * e.imag
        work += live * M
        tmp = met_a
        met_a = met_b
        met_b = tmp

    for k in range(K, n_data):
        yk = y[k]
        for t in range(P):
            c = yk - pat_yhat[t]
            res_pat[t] = c
            bm_pat[t] = c.real * c.real + c.imag * c.imag
        if n_rt > 0:
            for p in range(S):
                acc = 0.0j
                for t in range(n_rt):
                    acc += rt_h[t] * symvals[reg_a[p, rt_slot[t]]]
                regdot[p] = acc
        for n in range(S):
            nm = n % M
            nb = n // M
            best = np.inf
            bestr = 0
            for r in range(M):
                p = nb + r * SM1
                if n_rt > 0:
                    c = res_pat[pat_idx[p * M + nm]] - regdot[p]
                    cand = met_a[p] + c.real * c.real + c.imag * c.imag
                else:
                    cand = met_a[p] + bm_pat[pat_idx[p * M + nm]]
                if cand < best:
                    best = cand
                    bestr = r
                elif cand == best:
                    pb = nb + bestr * SM1
                    if _lex_less(dec_rec, k, K, M, SM1, pb, p, s1, s2):
                        bestr = r
            met_b[n] = best
            dec_rec[k, n] = np.int8(bestr)
            if reg_len > 0:
                pbest = nb + bestr * SM1
                reg_b[n, 0] = np.int8(bestr)
                for i in range(1, reg_len):
                    reg_b[n, i] = reg_a[pbest, i - 1]
        work += S * M
        tmp = met_a
        met_a = met_b
        met_b = tmp
        if reg_len > 0:
            tmpr = reg_a
            reg_a = reg_b
            reg_b = tmpr

    # zero-tail runout: per state a fixed prediction for each tail sample
    best_n = np.int64(0)
    best_m = np.inf
    for n in range(S):
        acc = met_a[n]
        for t in range(L_tail):
            pred = 0.0j
            for g in range(n_taps):
                i = tap_d[g] - t - 1
                if i >= 0:
                    if i < K:
                        pred += tap_h[g] * symvals[(n // pw[i]) % M]
                    else:
                        pred += tap_h[g] * symvals[reg_a[n, i - K]]
            e = y[n_data + t] - pred
            acc += e.real * e.real + e.imag * e.imag
        met_a[n] = acc
        work += L_tail
        if acc < best_m:
            best_m = acc
            best_n = n
        elif acc == best_m:
            if _lex_less(dec_rec, n_data, K, M, SM1, best_n, n, s1, s2):
                best_n = n

    dec = np.empty(n_data, np.int64)
    n = best_n
    for t in range(n_data - 1, -1, -1):
        dec[t] = n % M
        if t >= K:
            n = n // M + np.int64(dec_rec[t, n]) * SM1
        else:
            n = n // M
    return dec, met_a, best_n, best_m, work, dec_rec


@njit(cache=True, nogil=True)
def dfe_detect(y, n_data, M, symvals, tap_d, tap_h):
    """Stateless limit K=0: greedy symbol decisions with pure feedback.

    Also serves the memoryless channel (no feedback taps at all).  Returns
    decided indices, the accumulated metric including the zero-tail runout,
    and the branch-evaluation count.
    """
    n_taps = tap_d.shape[0]
    L_tail = tap_d[n_taps - 1]
    reg = np.full(max(L_tail, 1), M, np.int8)
    dec = np.empty(n_data, np.int64)
    work = np.int64(0)
    total = 0.0
    for k in range(n_data):
        fb = 0.0j
        for g in range(1, n_taps):
            fb += tap_h[g] * symvals[reg[tap_d[g] - 1]]
        r = y[k] - fb
        best = np.inf
        bestj = 0
        for j in range(M):
            e = r - tap_h[0] * symvals[j]
            bm = e.real * e.real + e.imag * e.imag
            if bm < best:
                best = bm
                bestj = j
        total += best
        dec[k] = bestj
        for i in range(L_tail - 1, 0, -1):
            reg[i] = reg[i - 1]
        if L_tail > 0:
            reg[0] = np.int8(bestj)
        work += M
    for t in range(L_tail):
        pred = 0.0j
        for g in range(n_taps):
            i = tap_d[g] - t - 1
            if i >= 0:
                pred += tap_h[g] * symvals[reg[i]]
        e = y[n_data + t] - pred
        total += e.real * e.real + e.imag * e.imag
        work += 1
    return dec, total, work

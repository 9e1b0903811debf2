"""Hot kernel: enumeration of orbit encodings inside a difference zone.

An orbit of a dim-d rational tuple under monotone integer-difference
preserving bijections is encoded as (floors, classes): floors[i] =
floor(x_i - x_0) and classes[i] = rank of frac(x_i - x_0) in the weak
order of fractional parts (class 0 = fractional part 0, always held by
coordinate 0).  The kernel enumerates every encoding whose orbit is
contained in a given zone, by depth-first assignment of coordinates with
bound propagation, so only valid prefixes are ever visited.

Bounds are integer-encoded: a bound (v, non-strict) on x_i - x_j becomes
2v, (v, strict) becomes 2v - 1.  The pairwise interval of an orbit
encodes as e = 2z for Point(z) and 2z + 1 for Open(z); the orbit
satisfies the zone iff -M[j,i] <= e(i,j) <= M[i,j] for all pairs.
Callers must make every matrix entry finite by conjoining a span cap.

The compiled path uses numba; set TIMEDPDA_NUMBA=0 to force the pure
Python/numpy fallback (same algorithm, same output).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("TIMEDPDA_NUMBA", "1") != "0"


def _enumerate_impl(d, M):
    out = np.empty((256, 2 * d), np.int64)
    count = 0
    if d == 1:
        out[0, 0] = 0
        out[0, 1] = 0
        return out[:1].copy()

    n = np.zeros(d, np.int64)
    r = np.zeros(d, np.int64)
    ncls = np.zeros(d + 1, np.int64)
    ncls[1] = 1
    r_snap = np.zeros((d, d), np.int64)
    ci = np.zeros(d, np.int64)
    nlo = np.zeros(d, np.int64)
    tot = np.zeros(d, np.int64)

    # candidate ranges for depth 1
    lo = n[0] - (M[0, 1] + 1) // 2
    hi = n[0] + (M[1, 0] + 1) // 2
    nlo[1] = lo
    tot[1] = 0 if hi < lo else (hi - lo + 1) * 2 * ncls[1]
    ci[1] = 0

    k = 1
    while k >= 1:
        if ci[k] >= tot[k]:
            k -= 1
            if k >= 1:
                for j in range(k):
                    r[j] = r_snap[k, j]
            continue
        cand = ci[k]
        ci[k] += 1
        m2 = 2 * ncls[k]
        nk = nlo[k] + cand // m2
        s = cand % m2

        ok = True
        if s & 1:
            cls_lo = s // 2
            for j in range(k):
                if r[j] <= cls_lo:
                    e = 2 * (nk - n[j]) + 1
                else:
                    e = 2 * (nk - n[j]) - 1
                if e > M[k, j] or -e > M[j, k]:
                    ok = False
                    break
        else:
            cls = s // 2
            for j in range(k):
                if r[j] == cls:
                    e = 2 * (nk - n[j])
                elif r[j] < cls:
                    e = 2 * (nk - n[j]) + 1
                else:
                    e = 2 * (nk - n[j]) - 1
                if e > M[k, j] or -e > M[j, k]:
                    ok = False
                    break
        if not ok:
            continue

        for j in range(k):
            r_snap[k, j] = r[j]
        if s & 1:
            ins = s // 2
            for j in range(k):
                if r[j] > ins:
                    r[j] += 1
            rk = ins + 1
            ncls[k + 1] = ncls[k] + 1
        else:
            rk = s // 2
            ncls[k + 1] = ncls[k]
        n[k] = nk
        r[k] = rk

        if k == d - 1:
            if count == out.shape[0]:
                grown = np.empty((out.shape[0] * 2, 2 * d), np.int64)
                grown[:count] = out
                out = grown
            for j in range(d):
                out[count, j] = n[j]
                out[count, d + j] = r[j]
            count += 1
            for j in range(k):
                r[j] = r_snap[k, j]
            continue

        k += 1
        lo = n[0] - (M[0, k] + 1) // 2
        hi = n[0] + (M[k, 0] + 1) // 2
        for j in range(1, k):
            v = n[j] - (M[j, k] + 1) // 2
            if v > lo:
                lo = v
            w = n[j] + (M[k, j] + 1) // 2
            if w < hi:
                hi = w
        nlo[k] = lo
        tot[k] = 0 if hi < lo else (hi - lo + 1) * 2 * ncls[k]
        ci[k] = 0

    return out[:count].copy()


_enumerate_numba = njit(cache=True)(_enumerate_impl) if NUMBA_AVAILABLE else None


def enumerate_encodings(M: np.ndarray, force_python: bool = False) -> np.ndarray:
    """All orbit encodings [floors | classes] whose orbit lies in the zone.

    M is the (d, d) int64 matrix of integer-encoded upper bounds, every
    entry finite (callers conjoin a span cap first); the diagonal is
    ignored.  Rows come back in a deterministic depth-first order.
    """
    d = M.shape[0]
    if d < 1:
        raise ValueError("kernel requires dim >= 1")
    M = np.ascontiguousarray(M, dtype=np.int64)
    if USE_NUMBA and not force_python:
        return _enumerate_numba(d, M)
    return _enumerate_impl(d, M)

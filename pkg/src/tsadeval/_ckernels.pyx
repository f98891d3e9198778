# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Signatures mirror ``tsadeval._pykernels`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.uint8_t u8


def merge_sorted(const i64[::1] starts, const i64[::1] ends):
    cdef Py_ssize_t n = starts.shape[0]
    out_s = np.empty(n, dtype=np.int64)
    out_e = np.empty(n, dtype=np.int64)
    cdef i64[::1] os = out_s
    cdef i64[::1] oe = out_e
    cdef Py_ssize_t i, k = 0
    cdef i64 cs, ce
    if n == 0:
        return out_s, out_e
    cs = starts[0]
    ce = ends[0]
    for i in range(1, n):
        if starts[i] <= ce:
            if ends[i] > ce:
                ce = ends[i]
        else:
            os[k] = cs
            oe[k] = ce
            k += 1
            cs = starts[i]
            ce = ends[i]
    os[k] = cs
    oe[k] = ce
    k += 1
    return out_s[:k].copy(), out_e[:k].copy()


def mask_runs(const u8[::1] mask):
    cdef Py_ssize_t n = mask.shape[0]
    cdef Py_ssize_t i, k = 0, cap = 16
    rs = np.empty(cap, dtype=np.int64)
    re = np.empty(cap, dtype=np.int64)
    cdef i64[::1] vrs = rs
    cdef i64[::1] vre = re
    cdef bint inside = False
    for i in range(n):
        if mask[i]:
            if not inside:
                if k == cap:
                    cap *= 2
                    rs = np.resize(rs, cap)
                    re = np.resize(re, cap)
                    vrs = rs
                    vre = re
                vrs[k] = i
                inside = True
        elif inside:
            vre[k] = i - 1
            k += 1
            inside = False
    if inside:
        vre[k] = n - 1
        k += 1
    return rs[:k].copy(), re[:k].copy()


def zoh_resample_index(const i64[::1] ts, const u8[::1] labels, const i64[::1] grid):
    cdef Py_ssize_t n = ts.shape[0]
    cdef Py_ssize_t m = grid.shape[0]
    out = np.zeros(m, dtype=np.int64)
    cdef i64[::1] idx = out
    cdef Py_ssize_t j = 0, k, last_ann
    cdef i64 prev_g
    if n == 0 or m == 0:
        return out
    for k in range(m):
        # originals strictly between grid[k-1] and grid[k]
        last_ann = -1
        while j < n and ts[j] < grid[k]:
            if k > 0 and labels[j] and ts[j] > grid[k - 1]:
                last_ann = j
            j += 1
        if j < n and ts[j] == grid[k]:
            idx[k] = j
        elif j > 0:
            idx[k] = j - 1
        else:
            idx[k] = 0
        if last_ann >= 0 and not labels[idx[k]]:
            idx[k] = last_ann
    return out


def intersect(const i64[::1] a_s, const i64[::1] a_e,
              const i64[::1] b_s, const i64[::1] b_e):
    cdef Py_ssize_t na = a_s.shape[0], nb = b_s.shape[0]
    out_s = np.empty(na + nb, dtype=np.int64)
    out_e = np.empty(na + nb, dtype=np.int64)
    cdef i64[::1] os = out_s
    cdef i64[::1] oe = out_e
    cdef Py_ssize_t i = 0, j = 0, k = 0
    cdef i64 lo, hi
    while i < na and j < nb:
        lo = a_s[i] if a_s[i] > b_s[j] else b_s[j]
        hi = a_e[i] if a_e[i] < b_e[j] else b_e[j]
        if lo <= hi:
            os[k] = lo
            oe[k] = hi
            k += 1
        if a_e[i] < b_e[j]:
            i += 1
        else:
            j += 1
    return out_s[:k].copy(), out_e[:k].copy()


def intersection_measure(const i64[::1] a_s, const i64[::1] a_e,
                         const i64[::1] b_s, const i64[::1] b_e):
    cdef Py_ssize_t na = a_s.shape[0], nb = b_s.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef i64 lo, hi, total = 0
    while i < na and j < nb:
        lo = a_s[i] if a_s[i] > b_s[j] else b_s[j]
        hi = a_e[i] if a_e[i] < b_e[j] else b_e[j]
        if lo < hi:
            total += hi - lo
        if a_e[i] < b_e[j]:
            i += 1
        else:
            j += 1
    return total

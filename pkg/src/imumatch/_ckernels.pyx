# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled matching kernels.

Same signatures and results as :mod:`imumatch._pykernels`. Binary
descriptors arrive as uint64 words (Hamming via popcount); real descriptors
as float64 rows (Euclidean, summed left to right like the Python fallback).
"""
import numpy as np

from libc.math cimport sqrt, floor, INFINITY
from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

ctypedef fused desc_t:
    uint64_t
    double


cdef inline double _dist(const desc_t[:, ::1] a, Py_ssize_t i,
                         const desc_t[:, ::1] b, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t k
    cdef Py_ssize_t w = a.shape[1]
    cdef int64_t bits = 0
    cdef double acc = 0.0, diff
    if desc_t is uint64_t:
        for k in range(w):
            bits += __builtin_popcountll(a[i, k] ^ b[j, k])
        return <double>bits
    else:
        for k in range(w):
            diff = a[i, k] - b[j, k]
            acc = acc + diff * diff
        return sqrt(acc)


cdef inline void _offer(double d, int64_t tid, int64_t j, double *best, double *second,
                        int64_t *best_id, int64_t *best_j) noexcept nogil:
    if d < best[0] or (d == best[0] and tid < best_id[0]):
        second[0] = best[0]
        best[0] = d
        best_id[0] = tid
        best_j[0] = j
    elif d < second[0]:
        second[0] = d


def brute_force(const desc_t[:, ::1] src, const desc_t[:, ::1] tgt,
                const int64_t[::1] tgt_ids, const int64_t[::1] rows):
    cdef Py_ssize_t nr = rows.shape[0], m = tgt.shape[0], r, j
    cdef int64_t i, comparisons = 0
    out_j = np.full(nr, -1, dtype=np.int64)
    out_best = np.full(nr, np.inf)
    out_second = np.full(nr, np.inf)
    cdef int64_t[::1] bj = out_j
    cdef double[::1] bd = out_best
    cdef double[::1] sd = out_second
    cdef double best, second, d
    cdef int64_t best_id, best_j
    with nogil:
        for r in range(nr):
            i = rows[r]
            best = INFINITY
            second = INFINITY
            best_id = 0
            best_j = -1
            for j in range(m):
                d = _dist(src, i, tgt, j)
                comparisons += 1
                _offer(d, tgt_ids[j], j, &best, &second, &best_id, &best_j)
            bj[r] = best_j
            bd[r] = best
            sd[r] = second
    return out_j, out_best, out_second, comparisons


def windowed(const double[:, ::1] pred, const int64_t[::1] rows,
             const double[:, ::1] tgt_uv, const desc_t[:, ::1] src, const desc_t[:, ::1] tgt,
             const int64_t[::1] tgt_ids, double cell, int64_t i0, int64_t j0,
             int64_t nx, int64_t ny, const int64_t[::1] cell_start, const int64_t[::1] order):
    cdef Py_ssize_t nr = rows.shape[0], r
    cdef int64_t i, ci, cj, gx, gy, c, k, j, comparisons = 0, candidates = 0
    cdef int di, dj
    cdef double u, v, qu, qv, best, second, d, fu, fv
    cdef int64_t best_id, best_j
    out_j = np.full(nr, -1, dtype=np.int64)
    out_best = np.full(nr, np.inf)
    out_second = np.full(nr, np.inf)
    cdef int64_t[::1] bj = out_j
    cdef double[::1] bd = out_best
    cdef double[::1] sd = out_second
    with nogil:
        for r in range(nr):
            i = rows[r]
            u = pred[i, 0]
            v = pred[i, 1]
            best = INFINITY
            second = INFINITY
            best_id = 0
            best_j = -1
            fu = floor(u / cell)
            fv = floor(v / cell)
            # skip predictions whose neighbourhood cannot touch the grid
            if nx == 0 or fu < i0 - 1 or fu > i0 + nx or fv < j0 - 1 or fv > j0 + ny:
                continue
            ci = <int64_t>fu
            cj = <int64_t>fv
            for dj in range(-1, 2):
                gy = cj + dj - j0
                if gy < 0 or gy >= ny:
                    continue
                for di in range(-1, 2):
                    gx = ci + di - i0
                    if gx < 0 or gx >= nx:
                        continue
                    c = gy * nx + gx
                    for k in range(cell_start[c], cell_start[c + 1]):
                        j = order[k]
                        candidates += 1
                        qu = tgt_uv[j, 0]
                        qv = tgt_uv[j, 1]
                        if u - cell < qu and qu < u + cell and v - cell < qv and qv < v + cell:
                            d = _dist(src, i, tgt, j)
                            comparisons += 1
                            _offer(d, tgt_ids[j], j, &best, &second, &best_id, &best_j)
            bj[r] = best_j
            bd[r] = best
            sd[r] = second
    return out_j, out_best, out_second, comparisons, candidates


def grid(const double[:, ::1] uv, double cell):
    """Bucket target positions into square cells (stable counting sort).

    Returns ``(i0, j0, nx, ny, cell_start, order)``; see ``GridIndex``.
    """
    cdef Py_ssize_t m = uv.shape[0], j
    if m == 0:
        return 0, 0, 0, 0, np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    ci_arr = np.empty(m, dtype=np.int64)
    cj_arr = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] ci = ci_arr
    cdef int64_t[::1] cj = cj_arr
    cdef int64_t i0, j0, i1, j1, nx, ny, c
    with nogil:
        for j in range(m):
            ci[j] = <int64_t>floor(uv[j, 0] / cell)
            cj[j] = <int64_t>floor(uv[j, 1] / cell)
        i0 = i1 = ci[0]
        j0 = j1 = cj[0]
        for j in range(1, m):
            if ci[j] < i0: i0 = ci[j]
            if ci[j] > i1: i1 = ci[j]
            if cj[j] < j0: j0 = cj[j]
            if cj[j] > j1: j1 = cj[j]
    nx = i1 - i0 + 1
    ny = j1 - j0 + 1
    _check_cells(nx, ny)
    start_arr = np.zeros(nx * ny + 1, dtype=np.int64)
    order_arr = np.empty(m, dtype=np.int64)
    fill_arr = np.empty(nx * ny, dtype=np.int64)
    cdef int64_t[::1] start = start_arr
    cdef int64_t[::1] order = order_arr
    cdef int64_t[::1] fill = fill_arr
    with nogil:
        for j in range(m):
            start[(cj[j] - j0) * nx + (ci[j] - i0) + 1] += 1
        for c in range(nx * ny):
            start[c + 1] += start[c]
            fill[c] = start[c]
        for j in range(m):
            c = (cj[j] - j0) * nx + (ci[j] - i0)
            order[fill[c]] = j
            fill[c] += 1
    return i0, j0, nx, ny, start_arr, order_arr


MAX_CELLS = 1 << 24


def _check_cells(nx, ny):
    if nx * ny > MAX_CELLS:
        raise OverflowError(f"grid of {nx}x{ny} cells is too large; feature coordinates are too spread out")

"""Fallback matching kernels, used when the compiled extension is missing.

Results, including comparison and candidate counts, are identical to
:mod:`imumatch._ckernels`. Both are vectorized with numpy and process
candidates in an order-independent way, so the per-pair arithmetic (and the
tie rule) is all that has to agree with the compiled loops.
"""
import numpy as np

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)
_CHUNK = 1 << 20  # elements per distance block


def _distance_block(a, b):
    """All-pairs distances between the rows of ``a`` and ``b``."""
    if a.dtype == np.uint64:
        x = a[:, None, :] ^ b[None, :, :]
        if hasattr(np, "bitwise_count"):  # numpy >= 2.0
            return np.bitwise_count(x).sum(axis=-1, dtype=np.int64).astype(np.float64)
        return _POPCOUNT[x.view(np.uint8)].sum(axis=-1, dtype=np.int64).astype(np.float64)
    acc = np.zeros((len(a), len(b)))
    for k in range(a.shape[1]):
        # column by column, so sums round exactly like the scalar kernels
        diff = a[:, k, None] - b[None, :, k]
        acc = acc + diff * diff
    return np.sqrt(acc)


def brute_force(src, tgt, tgt_ids, rows):
    nr, m = len(rows), len(tgt)
    out_j = np.full(nr, -1, dtype=np.int64)
    out_best = np.full(nr, np.inf)
    out_second = np.full(nr, np.inf)
    if nr == 0 or m == 0:
        return out_j, out_best, out_second, 0
    # argmin keeps the first minimum, so order targets by id for the tie rule
    perm = np.argsort(tgt_ids, kind="stable")
    tgt_sorted = tgt[perm]
    step = max(1, _CHUNK // (m * max(1, tgt.shape[1])))
    for lo in range(0, nr, step):
        r = rows[lo:lo + step]
        d = _distance_block(src[r], tgt_sorted)
        d[np.isnan(d)] = np.inf
        idx = np.arange(len(r))
        jj = d.argmin(axis=1)
        best = d[idx, jj]
        d[idx, jj] = np.inf
        found = best < np.inf
        out_j[lo:lo + step] = np.where(found, perm[jj], -1)
        out_best[lo:lo + step] = np.where(found, best, np.inf)
        out_second[lo:lo + step] = d.min(axis=1)
    return out_j, out_best, out_second, nr * m


def _pair_distances(a, b):
    """Row-wise distances between ``a[k]`` and ``b[k]``."""
    if a.dtype == np.uint64:
        x = a ^ b
        if hasattr(np, "bitwise_count"):
            return np.bitwise_count(x).sum(axis=-1, dtype=np.int64).astype(np.float64)
        return _POPCOUNT[x.view(np.uint8)].sum(axis=-1, dtype=np.int64).astype(np.float64)
    acc = np.zeros(len(a))
    for k in range(a.shape[1]):
        diff = a[:, k] - b[:, k]
        acc = acc + diff * diff
    return np.sqrt(acc)


def windowed(pred, rows, tgt_uv, src, tgt, tgt_ids, cell, i0, j0, nx, ny, cell_start, order):
    nr = len(rows)
    out_j = np.full(nr, -1, dtype=np.int64)
    out_best = np.full(nr, np.inf)
    out_second = np.full(nr, np.inf)
    if nr == 0 or nx == 0:
        return out_j, out_best, out_second, 0, 0
    u = pred[rows, 0]
    v = pred[rows, 1]
    with np.errstate(invalid="ignore"):
        fu = np.floor(u / cell)
        fv = np.floor(v / cell)
    # predictions whose neighbourhood cannot touch the grid are skipped
    near = (fu >= i0 - 1) & (fu <= i0 + nx) & (fv >= j0 - 1) & (fv <= j0 + ny)
    ci = np.where(near, fu, i0 - 2).astype(np.int64)
    cj = np.where(near, fv, j0 - 2).astype(np.int64)

    # one (row, cell) entry per in-grid neighbour cell, dj-major like the compiled loop
    entry_row, entry_cell = [], []
    for dj in (-1, 0, 1):
        gy = cj + dj - j0
        for di in (-1, 0, 1):
            gx = ci + di - i0
            ok = near & (gx >= 0) & (gx < nx) & (gy >= 0) & (gy < ny)
            r = np.flatnonzero(ok)
            entry_row.append(r)
            entry_cell.append(gy[r] * nx + gx[r])
    entry_row = np.concatenate(entry_row)
    entry_cell = np.concatenate(entry_cell)
    counts = cell_start[entry_cell + 1] - cell_start[entry_cell]
    candidates = int(counts.sum())
    if candidates == 0:
        return out_j, out_best, out_second, 0, 0

    # expand every entry into its cell's run of target indices
    cand_row = np.repeat(entry_row, counts)
    run_start = np.repeat(cell_start[entry_cell] - (np.cumsum(counts) - counts), counts)
    cand_j = order[run_start + np.arange(candidates)]
    qu = tgt_uv[cand_j, 0]
    qv = tgt_uv[cand_j, 1]
    ru, rv = u[cand_row], v[cand_row]
    inside = (ru - cell < qu) & (qu < ru + cell) & (rv - cell < qv) & (qv < rv + cell)
    cand_row, cand_j = cand_row[inside], cand_j[inside]
    comparisons = len(cand_row)
    if comparisons == 0:
        return out_j, out_best, out_second, 0, candidates

    d = _pair_distances(src[rows[cand_row]], tgt[cand_j])
    d[np.isnan(d)] = np.inf
    tid = tgt_ids[cand_j]
    # per row: smallest distance first, lower target id on ties
    srt = np.lexsort((tid, d, cand_row))
    cand_row, cand_j, d = cand_row[srt], cand_j[srt], d[srt]
    first = np.flatnonzero(np.r_[True, cand_row[1:] != cand_row[:-1]])
    has_second = np.r_[first[1:], len(cand_row)] - first > 1
    best_rows = cand_row[first]
    found = d[first] < np.inf
    out_j[best_rows] = np.where(found, cand_j[first], -1)
    out_best[best_rows] = np.where(found, d[first], np.inf)
    out_second[best_rows[has_second]] = d[first[has_second] + 1]
    return out_j, out_best, out_second, comparisons, candidates


MAX_CELLS = 1 << 24


def grid(uv, cell):
    if len(uv) == 0:
        return 0, 0, 0, 0, np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    ci = np.floor(uv[:, 0] / cell).astype(np.int64)
    cj = np.floor(uv[:, 1] / cell).astype(np.int64)
    i0, j0 = int(ci.min()), int(cj.min())
    nx, ny = int(ci.max()) - i0 + 1, int(cj.max()) - j0 + 1
    if nx * ny > MAX_CELLS:
        raise OverflowError(f"grid of {nx}x{ny} cells is too large; feature coordinates are too spread out")
    key = (cj - j0) * nx + (ci - i0)
    order = np.argsort(key, kind="stable").astype(np.int64)
    cell_start = np.zeros(nx * ny + 1, dtype=np.int64)
    np.cumsum(np.bincount(key, minlength=nx * ny), out=cell_start[1:])
    return i0, j0, nx, ny, cell_start, order

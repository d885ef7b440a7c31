"""Windowed (prediction-guided) and brute-force descriptor matching.

Both matchers share the acceptance rule so their outputs are directly
comparable: the candidate with the smallest descriptor distance wins, ties
go to the lower target id, and the winner must pass the absolute distance
gate and, when configured, the ratio gate ``best < ratio * second_best``.
Several source features may claim the same target.
"""
from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AlignmentError, IncompatibleDescriptorError, InvalidArgumentError
from .features import Descriptor, DescriptorKind, Frame, PackedFrame
from .kernels import get_backend
from .predictor import Prediction, PredictionStatus

DEFAULT_THRESHOLD = 10.0


class Metric(str, enum.Enum):
    HAMMING = "hamming"
    EUCLIDEAN = "euclidean"


_METRIC_KIND = {Metric.HAMMING: DescriptorKind.BINARY, Metric.EUCLIDEAN: DescriptorKind.REAL}


@dataclass(frozen=True)
class MatchParams:
    threshold: float = DEFAULT_THRESHOLD
    metric: Metric = Metric.HAMMING
    # None: a quarter of the bits for Hamming, 0.7 for unit-scale real vectors
    max_descriptor_distance: float | None = None
    ratio: float | None = None
    fallback_brute_force: bool = False

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        if not self.threshold > 0:
            raise InvalidArgumentError(f"threshold must be positive, got {self.threshold!r}")
        if self.max_descriptor_distance is not None and self.max_descriptor_distance < 0:
            raise InvalidArgumentError("max_descriptor_distance must be >= 0")
        if self.ratio is not None and not (0 < self.ratio <= 1):
            raise InvalidArgumentError(f"ratio must lie in (0, 1], got {self.ratio!r}")

    def gate(self, descriptor_length: int) -> float:
        if self.max_descriptor_distance is not None:
            return float(self.max_descriptor_distance)
        if self.metric is Metric.HAMMING:
            return descriptor_length * 8 / 4
        return 0.7


class MatchPair(NamedTuple):
    source_id: int
    target_id: int
    descriptor_distance: float
    predicted: tuple[float, float] | None = None


class MatchReport:
    """Accepted pairs in source-feature order, plus work counters.

    The matchers store pairs as arrays; ``pairs`` turns them into
    ``MatchPair`` tuples on first access, so building Python objects is not
    part of ``elapsed``.
    """

    def __init__(self, pairs=(), comparisons: int = 0, candidates_examined: int = 0, elapsed: float = 0.0):
        self._pairs = list(pairs)
        self._columns = None
        self.comparisons = comparisons
        self.candidates_examined = candidates_examined
        self.elapsed = elapsed

    @property
    def pairs(self) -> list[MatchPair]:
        if self._columns is not None:
            sids, tids, dists, uv = (c.tolist() for c in self._columns)
            self._pairs = [MatchPair(s, t, d, None if u != u else (u, v))
                           for s, t, d, (u, v) in zip(sids, tids, dists, uv)]
            self._columns = None
        return self._pairs

    @pairs.setter
    def pairs(self, value):
        self._pairs = list(value)
        self._columns = None

    def __len__(self) -> int:
        return len(self._columns[0]) if self._columns is not None else len(self._pairs)

    def pair_set(self) -> set[tuple[int, int]]:
        return {(p.source_id, p.target_id) for p in self.pairs}

    def __repr__(self):
        return (f"MatchReport({len(self)} pairs, comparisons={self.comparisons}, "
                f"candidates_examined={self.candidates_examined}, elapsed={self.elapsed:.6f})")


def descriptor_distance(a: Descriptor, b: Descriptor, metric=Metric.HAMMING) -> float:
    metric = Metric(metric)
    if a.kind is not b.kind or a.length != b.length:
        raise IncompatibleDescriptorError(
            f"cannot compare {a.kind.value}/{a.length} with {b.kind.value}/{b.length}")
    if a.kind is not _METRIC_KIND[metric]:
        raise IncompatibleDescriptorError(f"{metric.value} needs {_METRIC_KIND[metric].value} descriptors")
    if metric is Metric.HAMMING:
        x = int.from_bytes(a.data, "little") ^ int.from_bytes(b.data, "little")
        return float(x.bit_count())
    acc = 0.0
    for x, y in zip(a.data, b.data):
        acc += (x - y) * (x - y)
    return math.sqrt(acc)


@dataclass(frozen=True)
class GridIndex:
    """Uniform grid over target features, stored as sorted cell runs.

    Cell ``(i, j)`` covers ``[i*cell_size, (i+1)*cell_size)`` in u and the
    same in v. ``order[cell_start[c]:cell_start[c+1]]`` lists the feature
    indices of linear cell ``c = (j - j0) * nx + (i - i0)``.
    """

    cell_size: float
    i0: int
    j0: int
    nx: int
    ny: int
    cell_start: np.ndarray
    order: np.ndarray
    ids: np.ndarray

    @property
    def cells(self) -> dict[tuple[int, int], list[int]]:
        out = {}
        for c in range(self.nx * self.ny):
            lo, hi = self.cell_start[c], self.cell_start[c + 1]
            if hi > lo:
                j, i = divmod(c, self.nx)
                out[(i + self.i0, j + self.j0)] = self.ids[self.order[lo:hi]].tolist()
        return out

    def neighbourhood(self, u: float, v: float) -> list[int]:
        """Feature indices in the 3x3 block of cells around ``(u, v)``."""
        ci = math.floor(u / self.cell_size)
        cj = math.floor(v / self.cell_size)
        found = []
        for gy in range(cj - 1 - self.j0, cj + 2 - self.j0):
            if not 0 <= gy < self.ny:
                continue
            for gx in range(ci - 1 - self.i0, ci + 2 - self.i0):
                if 0 <= gx < self.nx:
                    c = gy * self.nx + gx
                    found.extend(self.order[self.cell_start[c]:self.cell_start[c + 1]].tolist())
        return found


def build_grid(frame: Frame, cell_size: float, *, backend: str | None = None) -> GridIndex:
    if not cell_size > 0:
        raise InvalidArgumentError(f"cell_size must be positive, got {cell_size!r}")
    packed = frame.packed
    if not np.isfinite(packed.uv).all():
        raise InvalidArgumentError("feature coordinates must be finite")
    try:
        i0, j0, nx, ny, cell_start, order = get_backend(backend).grid(packed.uv, float(cell_size))
    except OverflowError as exc:
        raise InvalidArgumentError(str(exc)) from None
    return GridIndex(cell_size, i0, j0, nx, ny, cell_start, order, packed.ids)


def _check_compatible(sp: PackedFrame, tp: PackedFrame, metric: Metric):
    for p in (sp, tp):
        if p.kind is not None and p.kind is not _METRIC_KIND[metric]:
            raise IncompatibleDescriptorError(f"{metric.value} needs {_METRIC_KIND[metric].value} descriptors")
    if sp.kind is not None and tp.kind is not None and sp.length != tp.length:
        raise IncompatibleDescriptorError(
            f"descriptor lengths differ: source {sp.length}, target {tp.length}")


def _run(rows, threads, call):
    """Run ``call`` over ``rows``, split across threads when asked.

    Outputs are concatenated in row order and counters summed, so the result
    does not depend on the schedule.
    """
    if threads <= 1 or len(rows) < 2 * threads:
        return call(rows)
    chunks = np.array_split(rows, threads)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(call, [np.ascontiguousarray(c) for c in chunks]))
    merged = [np.concatenate([p[k] for p in parts]) for k in range(3)]
    merged.extend(sum(p[k] for p in parts) for k in range(3, len(parts[0])))
    return tuple(merged)


def _accept(source: Frame, target: Frame, rows, result, params, gate, pred=None):
    """Apply the distance and ratio gates; return ``(source_rows, columns)``."""
    best_j, best_d, second_d = result[:3]
    ok = (best_j >= 0) & (best_d <= gate)
    if params.ratio is not None:
        ok &= ~np.isfinite(second_d) | (best_d < params.ratio * second_d)
    sel = np.flatnonzero(ok)
    src_rows = rows[sel]
    if pred is None:
        uv = np.full((len(sel), 2), np.nan)
    else:
        uv = pred[src_rows]
    return src_rows, (source.packed.ids[src_rows], target.packed.ids[best_j[sel]], best_d[sel], uv)


def brute_force_match(source: Frame, target: Frame, params: MatchParams = MatchParams(),
                      *, backend: str | None = None, threads: int = 1) -> MatchReport:
    """Compare every source descriptor with every target descriptor."""
    kern = get_backend(backend)
    sp, tp = source.packed, target.packed
    _check_compatible(sp, tp, params.metric)
    report = MatchReport()
    start = time.perf_counter()
    n, m = len(sp.ids), len(tp.ids)
    if n and m:
        rows = np.arange(n, dtype=np.int64)
        result = _run(rows, threads,
                      lambda rr: kern.brute_force(sp.desc, tp.desc, tp.ids, rr))
        report.comparisons = int(result[3])
        report._columns = _accept(source, target, rows, result, params, params.gate(sp.length))[1]
    report.elapsed = time.perf_counter() - start
    return report


def neighboring_match(source: Frame, target: Frame, predictions: Sequence[Prediction],
                      params: MatchParams = MatchParams(), *, backend: str | None = None,
                      threads: int = 1) -> MatchReport:
    """Match each source feature only against targets near its prediction.

    A target ``q`` is a candidate when ``|q.u - u| < threshold`` and
    ``|q.v - v| < threshold`` (strict). Candidates come from a grid with
    ``cell_size == threshold``, so the 3x3 cell block around the prediction
    always covers the window. Features whose prediction failed are
    brute-forced when ``params.fallback_brute_force`` is set, otherwise left
    unmatched.
    """
    if len(predictions) != len(source.features):
        raise AlignmentError(
            f"{len(predictions)} predictions for {len(source.features)} source features")
    for p, f in zip(predictions, source.features):
        if p.feature_id != f.id:
            raise AlignmentError(f"prediction for feature {p.feature_id} aligned with feature {f.id}")

    kern = get_backend(backend)
    sp, tp = source.packed, target.packed
    _check_compatible(sp, tp, params.metric)
    report = MatchReport()
    gate = params.gate(sp.length)

    start = time.perf_counter()
    ok, out = PredictionStatus.OK, PredictionStatus.OUT_OF_FRAME
    n = len(predictions)
    _, us, vs, statuses = zip(*predictions) if n else ((), (), (), ())
    usable = np.fromiter([s is ok or s is out for s in statuses], dtype=bool, count=n)
    rows = np.flatnonzero(usable)
    failed = np.flatnonzero(~usable)
    m = len(tp.ids)
    if len(rows) and m:
        grid = build_grid(target, params.threshold, backend=backend)
        pred = np.empty((n, 2))
        pred[:, 0] = us
        pred[:, 1] = vs
        result = _run(rows, threads, lambda rr: kern.windowed(
            pred, rr, tp.uv, sp.desc, tp.desc, tp.ids, float(params.threshold),
            grid.i0, grid.j0, grid.nx, grid.ny, grid.cell_start, grid.order))
        report.comparisons += int(result[3])
        report.candidates_examined += int(result[4])
        accepted = _accept(source, target, rows, result, params, gate, pred)
        report._columns = accepted[1]
    if params.fallback_brute_force and len(failed) and m:
        result = _run(failed, threads,
                      lambda rr: kern.brute_force(sp.desc, tp.desc, tp.ids, rr))
        report.comparisons += int(result[3])
        extra = _accept(source, target, failed, result, params, gate)
        if len(extra[0]):
            if report._columns is None:
                report._columns = extra[1]
            else:
                # merge back into source-feature order
                order = np.argsort(np.concatenate([accepted[0], extra[0]]), kind="stable")
                report._columns = tuple(np.concatenate([a, b])[order]
                                        for a, b in zip(report._columns, extra[1]))
    report.elapsed = time.perf_counter() - start
    return report

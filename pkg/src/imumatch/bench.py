"""Benchmark runner behind the ``bench`` and ``match`` subcommands."""
from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import load_dataset, load_imu, parse_feature_file, list_feature_files, load_manifest
from .features import Frame
from .geometry import CameraIntrinsics
from .imu_state import IntegratorConfig, StateLog, build_log
from .matcher import MatchParams, MatchReport, brute_force_match, neighboring_match
from .predictor import Prediction, predict_frame
from .synth import GroundTruth, generate_scene, score_matches

log = logging.getLogger(__name__)

STRATEGIES = ("brute", "windowed")
MATCH_COLUMNS = ["dataset", "strategy", "elapsed_ms", "comparisons", "matches", "false_matches"]
BENCH_COLUMNS = ["dataset", "strategy", "pairs", "elapsed_ms", "comparisons", "candidates_examined",
                 "matches", "false_matches", "speedup", "comparison_ratio"]


@dataclass
class Workload:
    """Frames, IMU stream and optional truth for one dataset."""

    name: str
    frames: list[Frame]
    imu: list
    intrinsics: CameraIntrinsics
    truth: GroundTruth | None = None
    manifest: Path | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    _log: StateLog | None = None
    _predictions: dict = field(default_factory=dict, repr=False)

    @property
    def state_log(self) -> StateLog:
        if self._log is None:
            self._log = build_log(self.imu, self.integrator)
        return self._log

    def predictions(self, j1: int, j2: int) -> list[Prediction]:
        """Predictions for frame pair ``(j1, j2)``, computed once per workload."""
        key = (j1, j2)
        if key not in self._predictions:
            self._predictions[key] = predict_frame(self.frames[j1], self.state_log,
                                                   self.frames[j2].timestamp, self.intrinsics)
        return self._predictions[key]

    @classmethod
    def from_manifest(cls, path) -> "Workload":
        ds = load_dataset(path)
        return cls(ds.name, ds.frames, ds.imu, ds.manifest.intrinsics, ds.truth, Path(path))

    @classmethod
    def from_scene(cls, name, scene) -> "Workload":
        return cls(name, scene.frames, scene.imu, scene.truth.intrinsics, scene.truth)


@dataclass
class PairResult:
    report: MatchReport
    elapsed: float
    false_matches: int | None


def _reload_io(w: Workload, j1: int, j2: int):
    """Re-read the inputs of one frame pair from disk (``--include-io``)."""
    m = load_manifest(w.manifest)
    files = dict(list_feature_files(m.features_dir))
    f1 = parse_feature_file(files[min(files, key=lambda t: abs(t - w.frames[j1].timestamp))], m.width, m.height)
    f2 = parse_feature_file(files[min(files, key=lambda t: abs(t - w.frames[j2].timestamp))], m.width, m.height)
    return f1, f2, load_imu(m.imu_file)


def run_pair(w: Workload, j1: int, j2: int, strategy: str, params: MatchParams,
             *, threads: int = 1, include_io: bool = False, backend: str | None = None,
             score: bool = True) -> PairResult:
    start = time.perf_counter()
    if include_io and w.manifest is not None:
        f1, f2, imu = _reload_io(w, j1, j2)
    else:
        f1, f2, imu = w.frames[j1], w.frames[j2], None

    if strategy == "brute":
        report = brute_force_match(f1, f2, params, backend=backend, threads=threads)
    elif strategy == "windowed":
        if include_io:
            state_log = build_log(imu if imu is not None else w.imu, w.integrator)
            preds = predict_frame(f1, state_log, f2.timestamp, w.intrinsics)
        else:
            preds = w.predictions(j1, j2)
        report = neighboring_match(f1, f2, preds, params, backend=backend, threads=threads)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    elapsed = time.perf_counter() - start if include_io else report.elapsed

    false = None
    if score and w.truth is not None:
        false = score_matches(report, w.truth, (j1, j2))[1]
    return PairResult(report, elapsed, false)


@dataclass
class BenchRow:
    dataset: str
    strategy: str
    pairs: int
    elapsed_ms: float
    comparisons: float
    candidates_examined: float
    matches: float
    false_matches: float | None
    speedup: float = 1.0
    comparison_ratio: float = 1.0

    def as_list(self):
        def num(x, digits=None):
            if x is None:
                return ""
            if digits is None:
                return str(int(x)) if float(x).is_integer() else f"{x:.3f}"
            return f"{x:.{digits}f}"
        return [self.dataset, self.strategy, str(self.pairs), num(self.elapsed_ms, 3),
                num(self.comparisons), num(self.candidates_examined), num(self.matches),
                num(self.false_matches), num(self.speedup, 3), num(self.comparison_ratio, 6)]


def bench_workload(w: Workload, params: MatchParams, reps: int = 3, *, threads: int = 1,
                   include_io: bool = False, backend: str | None = None) -> list[BenchRow]:
    """Run both strategies over every consecutive frame pair of ``w``.

    Elapsed time is the median over ``reps`` of the per-dataset total. Counts
    come from the first repetition (they do not vary between repetitions).
    """
    n_pairs = len(w.frames) - 1
    if n_pairs < 1:
        raise ValueError(f"{w.name}: need at least two frames")
    rows = {}
    for strategy in STRATEGIES:
        totals = []
        counts = None
        for rep in range(max(reps, 1)):
            total = 0.0
            comps = cands = matches = 0
            false = 0 if w.truth is not None and rep == 0 else None
            for j in range(n_pairs):
                r = run_pair(w, j, j + 1, strategy, params, threads=threads,
                             include_io=include_io, backend=backend, score=rep == 0)
                total += r.elapsed
                comps += r.report.comparisons
                cands += r.report.candidates_examined
                matches += len(r.report)
                if false is not None:
                    false += r.false_matches
            totals.append(total)
            if counts is None:
                counts = (comps, cands, matches, false)
        ms = round(statistics.median(totals) * 1e3, 3)
        rows[strategy] = BenchRow(w.name, strategy, n_pairs, max(ms, 0.001), *counts)
    brute = rows["brute"]
    for row in rows.values():
        # derived from the rounded, printed values so they can be recomputed
        row.speedup = round(brute.elapsed_ms / row.elapsed_ms, 3)
        row.comparison_ratio = round(row.comparisons / brute.comparisons, 6) if brute.comparisons else 1.0
    return [rows[s] for s in STRATEGIES]


def average_rows(rows: list[BenchRow]) -> list[BenchRow]:
    out = []
    for strategy in STRATEGIES:
        sel = [r for r in rows if r.strategy == strategy]
        if not sel:
            continue

        def mean(attr, digits=3):
            vals = [getattr(r, attr) for r in sel]
            if any(v is None for v in vals):
                return None
            return round(statistics.fmean(vals), digits)

        out.append(BenchRow("Average", strategy, sum(r.pairs for r in sel), mean("elapsed_ms"),
                            mean("comparisons"), mean("candidates_examined"), mean("matches"),
                            mean("false_matches"), mean("speedup"), mean("comparison_ratio", 6)))
    return out


def to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(BENCH_COLUMNS)
    for r in rows:
        wr.writerow(r.as_list())
    return buf.getvalue()


def to_markdown(rows: list[BenchRow]) -> str:
    by = {}
    for r in rows:
        by.setdefault(r.dataset, {})[r.strategy] = r
    lines = ["Matching time (ms, median over repetitions)", "",
             "| dataset | brute ms | windowed ms | speedup | brute comparisons | windowed comparisons | ratio |",
             "|---|---|---|---|---|---|---|"]
    for name, d in by.items():
        b, w = d["brute"], d["windowed"]
        lines.append(f"| {name} | {b.elapsed_ms:.3f} | {w.elapsed_ms:.3f} | {w.speedup:.3f} | "
                     f"{b.as_list()[4]} | {w.as_list()[4]} | {w.comparison_ratio:.6f} |")
    if all(r.false_matches is not None for r in rows):
        lines += ["", "Matches per frame pair", "",
                  "| dataset | brute total | brute false | windowed total | windowed false |",
                  "|---|---|---|---|---|"]
        for name, d in by.items():
            b, w = d["brute"], d["windowed"]
            lines.append(f"| {name} | {b.matches / b.pairs:.2f} | {b.false_matches / b.pairs:.2f} | "
                         f"{w.matches / w.pairs:.2f} | {w.false_matches / w.pairs:.2f} |")
    return "\n".join(lines) + "\n"


def preset_workload(preset: str, seed: int, **overrides) -> Workload:
    from .synth import adversarial_config, preset_config
    cfg = adversarial_config(seed, **overrides) if preset == "adversarial" else \
        preset_config(preset, seed=seed, **overrides)
    return Workload.from_scene(preset, generate_scene(cfg))

"""Command-line entry point: ``imumatch {synth,match,bench}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys

from . import bench
from .errors import ImuMatchError
from .features import DescriptorKind
from .matcher import DEFAULT_THRESHOLD, MatchParams, Metric
from .synth import PRESETS, SceneConfig, Segment, adversarial_config, generate_scene

log = logging.getLogger("imumatch")

PRESET_CHOICES = sorted(PRESETS) + ["adversarial"]


def _add_match_flags(p: argparse.ArgumentParser):
    p.add_argument("--threshold", type=float, default=None,
                   help=f"search window half-width in pixels (default {DEFAULT_THRESHOLD:g})")
    p.add_argument("--metric", choices=[m.value for m in Metric], default=None,
                   help="descriptor metric (default: from the descriptor kind)")
    p.add_argument("--max-distance", type=float, default=None, help="absolute descriptor distance gate")
    p.add_argument("--ratio", type=float, default=None, help="second-best ratio gate in (0, 1]")
    p.add_argument("--fallback-brute", action="store_true",
                   help="brute-force features whose prediction failed")
    p.add_argument("--include-io", action="store_true", help="time file reading and prediction too")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--backend", choices=["cython", "python"], default=None)
    p.add_argument("--format", choices=["csv", "md"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imumatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene on disk")
    p.add_argument("--preset", choices=PRESET_CHOICES, default="initial")
    p.add_argument("--config", help="JSON file with SceneConfig fields (flags override it)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--num-points", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--imu-rate", type=float)
    p.add_argument("--frame-rate", type=float)
    p.add_argument("--gyro-noise", type=float)
    p.add_argument("--accel-noise", type=float)
    p.add_argument("--descriptor-kind", choices=[k.value for k in DescriptorKind])
    p.add_argument("--descriptor-length", type=int)
    p.add_argument("--descriptor-noise", type=float)
    p.add_argument("--distractors", type=int)

    p = sub.add_parser("match", help="match one frame pair of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pair", type=int, default=0, help="match frame PAIR against frame PAIR+1")
    p.add_argument("--frames", type=int, nargs=2, metavar=("SRC", "DST"))
    p.add_argument("--strategy", choices=bench.STRATEGIES, default="windowed")
    _add_match_flags(p)

    p = sub.add_parser("bench", help="compare both strategies over datasets")
    p.add_argument("--manifest", action="append", default=[], help="dataset manifest (repeatable)")
    p.add_argument("--preset", action="append", default=[], choices=PRESET_CHOICES,
                   help="generate a synthetic dataset in memory (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=3)
    _add_match_flags(p)
    return parser


def _params(args, desc_kind=None) -> MatchParams:
    metric = args.metric
    if metric is None:
        metric = Metric.EUCLIDEAN if desc_kind is DescriptorKind.REAL else Metric.HAMMING
    return MatchParams(
        threshold=args.threshold if args.threshold is not None else DEFAULT_THRESHOLD,
        metric=metric, max_descriptor_distance=args.max_distance, ratio=args.ratio,
        fallback_brute_force=args.fallback_brute)


def _desc_kind(w):
    for f in w.frames:
        if f.features:
            return f.features[0].descriptor.kind
    return None


def cmd_synth(args) -> int:
    fields = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            fields = json.load(fh)
        if "trajectory" in fields:
            fields["trajectory"] = tuple(Segment(**s) if isinstance(s, dict) else Segment(*s)
                                         for s in fields["trajectory"])
    flag_map = {"num_points": args.num_points, "duration": args.duration, "imu_rate": args.imu_rate,
                "frame_rate": args.frame_rate, "descriptor_kind": args.descriptor_kind,
                "descriptor_length": args.descriptor_length, "descriptor_noise": args.descriptor_noise,
                "num_distractors": args.distractors}
    fields.update({k: v for k, v in flag_map.items() if v is not None})
    if args.gyro_noise is not None or args.accel_noise is not None:
        g, a = fields.get("imu_noise_sigma", (0.0, 0.0))
        fields["imu_noise_sigma"] = (args.gyro_noise if args.gyro_noise is not None else g,
                                     args.accel_noise if args.accel_noise is not None else a)
    fields["seed"] = args.seed
    if args.preset == "adversarial":
        cfg = adversarial_config(**fields)
    else:
        fields.setdefault("trajectory", PRESETS[args.preset])
        known = {f.name for f in dataclasses.fields(SceneConfig)}
        unknown = set(fields) - known
        if unknown:
            raise ImuMatchError(f"unknown config keys: {sorted(unknown)}")
        cfg = SceneConfig(**fields)
    from .dataset import write_scene
    manifest = write_scene(generate_scene(cfg), args.out, name=args.preset)
    print(manifest)
    return 0


def cmd_match(args, parser) -> int:
    if args.strategy == "brute":
        if args.threshold is not None:
            parser.error("--threshold only applies to --strategy windowed")
        if args.fallback_brute:
            parser.error("--fallback-brute only applies to --strategy windowed")
    w = bench.Workload.from_manifest(args.manifest)
    j1, j2 = args.frames if args.frames else (args.pair, args.pair + 1)
    n = len(w.frames)
    if not (0 <= j1 < n and 0 <= j2 < n):
        raise ImuMatchError(f"frame pair ({j1}, {j2}) out of range: dataset has {n} frames")
    params = _params(args, _desc_kind(w))
    r = bench.run_pair(w, j1, j2, args.strategy, params, threads=args.threads,
                       include_io=args.include_io, backend=args.backend)
    row = [w.name, args.strategy, f"{r.elapsed * 1e3:.3f}", str(r.report.comparisons),
           str(len(r.report)), "" if r.false_matches is None else str(r.false_matches)]
    if args.format == "md":
        print("| " + " | ".join(bench.MATCH_COLUMNS) + " |")
        print("|" + "---|" * len(row))
        print("| " + " | ".join(row) + " |")
    else:
        wr = csv.writer(sys.stdout, lineterminator="\n")
        wr.writerow(bench.MATCH_COLUMNS)
        wr.writerow(row)
    return 0


def cmd_bench(args, parser) -> int:
    if not args.manifest and not args.preset:
        parser.error("bench needs at least one --manifest or --preset")
    if args.reps < 3:
        parser.error("--reps must be at least 3")
    rows, failures, total = [], 0, 0
    sources = [("manifest", m) for m in args.manifest] + [("preset", p) for p in args.preset]
    for kind, src in sources:
        total += 1
        try:
            if kind == "manifest":
                w = bench.Workload.from_manifest(src)
            else:
                w = bench.preset_workload(src, args.seed)
            rows += bench.bench_workload(w, _params(args, _desc_kind(w)), args.reps, threads=args.threads,
                                         include_io=args.include_io, backend=args.backend)
        except (ImuMatchError, OSError, ValueError) as exc:
            failures += 1
            log.warning("skipping %s: %s", src, exc)
    if not rows:
        return 1
    rows += bench.average_rows(rows)
    sys.stdout.write(bench.to_markdown(rows) if args.format == "md" else bench.to_csv(rows))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "match":
            return cmd_match(args, parser)
        return cmd_bench(args, parser)
    except (ImuMatchError, OSError, ValueError) as exc:
        print(f"imumatch: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

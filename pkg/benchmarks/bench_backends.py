"""Compare the compiled and pure-Python matching kernels.

Runs both matchers over consecutive frame pairs of a synthetic scene with
each available backend and prints one CSV row per (backend, strategy).

    python3 benchmarks/bench_backends.py --preset front1m --reps 5
"""
import argparse
import csv
import statistics
import sys

from imumatch.bench import preset_workload
from imumatch.kernels import available_backends
from imumatch.matcher import MatchParams, brute_force_match, neighboring_match


def time_strategy(w, strategy, backend, reps, params):
    totals = []
    for _ in range(reps):
        total = 0.0
        for j in range(len(w.frames) - 1):
            f1, f2 = w.frames[j], w.frames[j + 1]
            if strategy == "brute":
                r = brute_force_match(f1, f2, params, backend=backend)
            else:
                r = neighboring_match(f1, f2, w.predictions(j, j + 1), params, backend=backend)
            total += r.elapsed
        totals.append(total)
    return statistics.median(totals)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="front1m")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--num-points", type=int, default=300)
    ap.add_argument("--duration", type=float, default=2.0)
    args = ap.parse_args(argv)

    w = preset_workload(args.preset, args.seed, num_points=args.num_points, duration=args.duration)
    params = MatchParams()
    for j in range(len(w.frames) - 1):
        w.predictions(j, j + 1)  # warm the cache so only matching is timed

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["backend", "strategy", "pairs", "elapsed_ms", "ms_per_pair", "vs_python"])
    results = {}
    for backend in available_backends():
        for strategy in ("brute", "windowed"):
            results[backend, strategy] = time_strategy(w, strategy, backend, args.reps, params)
    pairs = len(w.frames) - 1
    for (backend, strategy), sec in sorted(results.items()):
        base = results["python", strategy]
        out.writerow([backend, strategy, pairs, f"{sec * 1e3:.3f}", f"{sec * 1e3 / pairs:.4f}",
                      f"{base / sec:.2f}"])
    if "cython" not in available_backends():
        print("note: compiled extension not built; only the Python backend was timed", file=sys.stderr)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Time bootstrap replicates at different worker counts on a synthetic study.

Usage:
    uv run python scripts/benchmark.py --replicates 200 --threads 1 2 4
"""

import argparse
import sys
import time
from pathlib import Path

# Add the src directory to the path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))


def format_time(seconds: float) -> str:
    """Format time in human readable format."""
    if seconds < 1:
        return f"{seconds * 1000:.1f}ms"
    return f"{seconds:.2f}s"


def benchmark_threads(attr, study, replicates: int, threads: int, seed: int) -> dict:
    from extreme_attribution.uncertainty.bootstrap import bootstrap_interval
    from extreme_attribution.uncertainty.intervals import BootstrapConfig

    config = BootstrapConfig(replicates=replicates, seed=seed)
    start = time.perf_counter()
    result = bootstrap_interval(attr, study.actual, study.counterfactual, config, threads=threads)
    elapsed = time.perf_counter() - start
    return {
        "threads": threads,
        "elapsed": elapsed,
        "per_replicate_ms": elapsed / replicates * 1000,
        "lower": result.lower,
        "upper": result.upper,
    }


def print_results_table(results: list[dict]):
    print("\n" + "=" * 60)
    print("BOOTSTRAP TIMINGS")
    print("=" * 60)
    print(f"{'Threads':>7} {'Total':>10} {'Per rep':>10} {'Speedup':>8} {'Interval':>20}")
    print("-" * 60)

    baseline = results[0]["elapsed"]
    for r in results:
        interval = f"[{r['lower']:.3f}, {r['upper']:.3f}]"
        print(
            f"{r['threads']:>7} "
            f"{format_time(r['elapsed']):>10} "
            f"{r['per_replicate_ms']:>8.1f}ms "
            f"{baseline / r['elapsed']:>7.2f}x "
            f"{interval:>20}"
        )

    print("=" * 60)
    print("\nIntervals must match across rows: replicates are seeded by index.")


def main():
    parser = argparse.ArgumentParser(description="Benchmark bootstrap replicates across threads")
    parser.add_argument(
        "--replicates",
        "-r",
        type=int,
        default=200,
        help="Bootstrap replicates per run (default: 200)",
    )
    parser.add_argument(
        "--threads",
        "-t",
        type=int,
        nargs="+",
        default=[1, 2, 4],
        help="Worker counts to time (default: 1 2 4)",
    )
    parser.add_argument(
        "--seed",
        "-s",
        type=int,
        default=0,
        help="Seed for the synthetic study and the bootstrap (default: 0)",
    )
    args = parser.parse_args()

    if args.replicates < 2:
        print("Error: need at least 2 replicates")
        sys.exit(1)
    if any(t < 1 for t in args.threads):
        print("Error: thread counts must be positive")
        sys.exit(1)

    # Import here so argument errors do not pay for numpy and scipy
    from extreme_attribution.analysis.attribution import EventDefinition, run_attribution
    from extreme_attribution.data.simulate import StudyTruth, simulate_study
    from extreme_attribution.evd.core import EVDParams

    truth = StudyTruth(
        actual=EVDParams((0.0, 1.5), 1.0, -0.1),
        counterfactual=EVDParams.stationary(0.0, 1.0, -0.1),
    )
    study = simulate_study(truth, seed=args.seed, p_a=0.05)
    event = EventDefinition(probability=study.p_a, event_year=study.event_year)
    attr = run_attribution(None, study.actual, study.counterfactual, event)
    print(f"Study: log2 RR estimate {attr.log2_rr:.3f} (true {study.true.log2_rr:.3f})")

    results = []
    for i, threads in enumerate(args.threads, 1):
        print(f"[{i}/{len(args.threads)}] {threads} thread(s)...", end=" ", flush=True)
        result = benchmark_threads(attr, study, args.replicates, threads, args.seed)
        print(format_time(result["elapsed"]))
        results.append(result)

    print_results_table(results)


if __name__ == "__main__":
    main()

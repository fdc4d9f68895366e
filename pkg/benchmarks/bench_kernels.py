"""Compare the compiled subsequence kernel against the pure-Python twin.

Both backends are run over the same oracle workload — enumerating candidate
originals from ghost-augmented observations — and their outputs are checked
for equality before timings are reported.

Usage:
    python3 benchmarks/bench_kernels.py [--observations N] [--budget K]
                                        [--repeats R]
"""

import argparse
import dataclasses
import statistics
import time

from ghostkeys import _kernels, defaults
from ghostkeys.attack import enumerate_guesses
from ghostkeys.corpus import synthetic_passwords
from ghostkeys.generator import generate, mix_seed
from ghostkeys._kernels import _pure


def build_workload(n_observations: int):
    """Ghost observations short enough for the oracle to enumerate."""
    model, calibration, layout = defaults.default_bundle()
    base = defaults.evaluation_config(r=0.3)
    observations = []
    i = 0
    while len(observations) < n_observations:
        password = synthetic_passwords(
            1, seed=mix_seed(9000, i), min_len=8, max_len=12
        )[0]
        config = dataclasses.replace(base, rng_seed=mix_seed(9100, i))
        ghost = generate(config, password, model, calibration, layout).ghost
        if len(ghost) <= 24:
            observations.append(ghost)
        i += 1
    return model, observations


def run_backend(impl, model, observations, budget, repeats):
    """Time the full oracle under one kernel implementation."""
    original = _kernels.top_subsequences
    _kernels.top_subsequences = impl.top_subsequences
    try:
        outputs = [
            enumerate_guesses(obs, model, budget) for obs in observations
        ]  # warmup + correctness capture
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            for obs in observations:
                enumerate_guesses(obs, model, budget)
            times.append(time.perf_counter() - start)
    finally:
        _kernels.top_subsequences = original
    return outputs, times


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--observations", type=int, default=20)
    parser.add_argument("--budget", type=int, default=1000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"active backend at import: {_kernels.BACKEND}")
    try:
        from ghostkeys._kernels import _subseq
    except ImportError:
        print("compiled kernel not built; nothing to compare")
        return 0

    model, observations = build_workload(args.observations)
    lengths = sorted(len(o) for o in observations)
    print(
        f"workload: {len(observations)} observations, "
        f"lengths {lengths[0]}..{lengths[-1]}, budget {args.budget}, "
        f"{args.repeats} timed repeats"
    )

    pure_out, pure_times = run_backend(
        _pure, model, observations, args.budget, args.repeats
    )
    fast_out, fast_times = run_backend(
        _subseq, model, observations, args.budget, args.repeats
    )

    if pure_out != fast_out:
        print("MISMATCH: backends disagree on oracle output")
        return 1
    print("outputs identical across backends")

    pure_best = min(pure_times)
    fast_best = min(fast_times)
    per = len(observations)
    print(f"{'backend':<10} {'best total':>12} {'per call':>12} {'stdev':>10}")
    for name, times in (("pure", pure_times), ("compiled", fast_times)):
        best = min(times)
        stdev = statistics.stdev(times) if len(times) > 1 else 0.0
        print(
            f"{name:<10} {best:>11.3f}s {best / per * 1e3:>10.2f}ms"
            f" {stdev:>9.4f}s"
        )
    print(f"speedup: {pure_best / fast_best:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Compare the compiled-kernel backend against the pure NumPy fallback.

Runs the same seeded Monte Carlo workload in two subprocesses, one per
ERGODIC_ALIGN_BACKEND value, and reports wall time and throughput.  The two
backends must produce identical estimates; the script exits nonzero if they
do not.

Usage: python benchmarks/bench_backends.py [--trials N] [--n N] [--q Q]
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKLOAD = """
import json, sys, time
from ergodic_align import Composition, SchemeSpec, monte_carlo, _kernels

trials, n, q = (int(v) for v in sys.argv[1:4])
spec = SchemeSpec("japb", a=Composition((1,) * (n - 2) + (2,)))

t0 = time.perf_counter()
warm = monte_carlo(spec, n, q, trials=10, seed=1)
warmup = time.perf_counter() - t0

t0 = time.perf_counter()
stats = monte_carlo(spec, n, q, trials=trials, seed=1)
elapsed = time.perf_counter() - t0

print(json.dumps({
    "backend": _kernels.BACKEND,
    "warmup_s": warmup,
    "elapsed_s": elapsed,
    "trials_per_s": trials / elapsed,
    "mean_delay": stats.mean_delay,
}))
"""


def run(backend, trials, n, q):
    env = dict(os.environ, ERGODIC_ALIGN_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", WORKLOAD, str(trials), str(n), str(q)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=5000)
    parser.add_argument("--n", type=int, default=5)
    parser.add_argument("--q", type=int, default=7)
    args = parser.parse_args()

    results = {}
    for backend in ("numpy", "numba"):
        print(f"running {backend} backend ...", flush=True)
        results[backend] = run(backend, args.trials, args.n, args.q)

    print(f"\nworkload: japb([1,...,1,2]) n={args.n} q={args.q} "
          f"trials={args.trials}\n")
    print(f"{'backend':<8} {'warmup s':>10} {'elapsed s':>10} "
          f"{'trials/s':>10} {'mean delay':>12}")
    for backend, r in results.items():
        print(f"{backend:<8} {r['warmup_s']:>10.2f} {r['elapsed_s']:>10.2f} "
              f"{r['trials_per_s']:>10.1f} {r['mean_delay']:>12.3f}")
    speedup = results["numpy"]["elapsed_s"] / results["numba"]["elapsed_s"]
    print(f"\nspeedup (numba over numpy): {speedup:.1f}x")

    if results["numpy"]["mean_delay"] != results["numba"]["mean_delay"]:
        print("ERROR: backends disagree on the seeded estimate", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

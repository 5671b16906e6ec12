"""Compare the compiled-loop kernels with their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints per-kernel timings for both variants, then times the full noise-free
pipeline once with the compiled kernels and once with SECSEG_NO_JIT=1.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from secseg import kernels

PIPELINE = """
import time
import numpy as np
from secseg import kernels
from secseg.extract import extract_event_chain
from secseg.harness import ARCHETYPES, TRAINED, random_activity, synthesize, training_samples
from secseg.learn import learn_model
from secseg.recognize import analyze
by = {}
for k, name in enumerate(TRAINED):
    by.setdefault(ARCHETYPES[name].label, []).extend(training_samples(name, 3, seed=k))
models = [learn_model(lab, s) for lab, s in by.items()]
rng = np.random.default_rng(0)
chains = [extract_event_chain(synthesize(random_activity(rng, 6, parallel=True), seed=t)[0]) for t in range(20)]
analyze(chains[0], models)
t0 = time.perf_counter()
for c in chains:
    analyze(c, models)
print(f"{kernels.BACKEND:>6}: {1000 * (time.perf_counter() - t0) / len(chains):8.2f} ms per activity")
"""


def inputs(rng):
    row = rng.integers(0, 3, size=400).astype(np.uint8)
    a = rng.integers(0, 3, size=60).astype(np.uint8)
    b = rng.integers(0, 3, size=80).astype(np.uint8)
    x = rng.integers(1, 3, size=(4, 120)).astype(np.uint8)
    y = rng.integers(1, 3, size=(4, 150)).astype(np.uint8)
    return {"block_cover": (row,), "shift_match": (a, b), "lcs_table": (x, y)}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy kernels are available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12} {'loop (us)':>12} {'numpy (us)':>12}")
    for name, argv in inputs(rng).items():
        loop, vec = getattr(kernels, f"{name}_loop"), getattr(kernels, f"{name}_numpy")
        assert np.array_equal(np.asarray(loop(*argv)), np.asarray(vec(*argv)))
        loop(*argv)  # compile
        t_loop = min(timeit.repeat(lambda: loop(*argv), number=args.repeat, repeat=3)) / args.repeat
        t_vec = min(timeit.repeat(lambda: vec(*argv), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:<12} {1e6 * t_loop:12.1f} {1e6 * t_vec:12.1f}")
    print("\nend to end (20 activities of 6 actions, one parallel step each)", flush=True)
    for flag in ("", "1"):
        env = dict(os.environ, SECSEG_NO_JIT=flag)
        subprocess.run([sys.executable, "-c", PIPELINE], env=env, check=True)


if __name__ == "__main__":
    main()

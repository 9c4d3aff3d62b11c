"""Benchmark the compiled kernels against the pure-numpy fallbacks.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 8,64,1024] [--repeat 20000]
    python3 benchmarks/bench_kernels.py --end-to-end

Per-kernel mode times both backends on identical inputs and prints the
speedup. End-to-end mode times a full guided-SMC sampling workload under
each backend by flipping it at runtime.
"""

import argparse
import time

import numpy as np

from guided_ardm import kernels


def _time(fn, args, repeat):
    fn(*args)  # warm: trigger any compile outside the timed region
    best = []
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best.append((time.perf_counter() - t0) / repeat)
    arr = np.array(best)
    return float(arr.mean()), float(arr.std())


def _inputs(size, rng):
    log_w = rng.normal(-1.0, 2.0, size)
    log_w[rng.random(size) < 0.1] = -np.inf
    if not np.any(np.isfinite(log_w)):
        log_w[0] = 0.0
    w = np.exp(log_w - np.max(log_w[np.isfinite(log_w)]))
    w = w / w.sum()
    base = rng.dirichlet(np.ones(size))
    probs = rng.dirichlet(np.ones(size))
    q = rng.dirichlet(np.ones(size))
    return {
        "normalize_from_log": (log_w,),
        "effective_sample_size": (w,),
        "systematic_resample": (w, 0.37, size),
        "categorical_draw": (probs, 0.53),
        "guided_probs": (base, log_w),
        "tv_distance_flat": (probs, q),
    }


def per_kernel(sizes, repeat):
    if "numba" not in kernels.available_backends():
        print("numba backend unavailable; nothing to compare")
        return
    rng = np.random.default_rng(0)
    header = f"{'kernel':24s} {'size':>6s} {'numpy':>12s} {'numba':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for size in sizes:
        cases = _inputs(size, rng)
        for name, args in cases.items():
            results = {}
            for backend in ("numpy", "numba"):
                prev = kernels.set_backend(backend)
                try:
                    mean, _ = _time(getattr(kernels, name), args, repeat)
                finally:
                    kernels.set_backend(prev)
                results[backend] = mean
            ratio = results["numpy"] / results["numba"]
            print(
                f"{name:24s} {size:6d} "
                f"{results['numpy'] * 1e6:10.3f}us "
                f"{results['numba'] * 1e6:10.3f}us "
                f"{ratio:7.2f}x"
            )


def end_to_end(num_samples):
    from guided_ardm import (
        GenerationOrder,
        KeyedRng,
        TabularJoint,
        corrupt,
        fadg_sample,
        optimal_discriminator,
        perturb,
    )

    p_data = TabularJoint(
        [2, 2, 2], np.array([0.30, 0.02, 0.05, 0.13, 0.04, 0.16, 0.24, 0.06])
    )
    p_model = perturb(p_data, 2.0, 0.25)
    disc = corrupt(optimal_discriminator(p_data, p_model), 0.5)

    def workload():
        for k in range(num_samples):
            srng = KeyedRng(5).child(k)
            perm = srng.stream(3).permutation(3)
            order = GenerationOrder(tuple(int(p) for p in perm))
            fadg_sample(p_model, disc, order, n_particles=16, rng=srng)

    for backend in ("numpy", "numba"):
        if backend not in kernels.available_backends():
            print(f"{backend}: unavailable")
            continue
        prev = kernels.set_backend(backend)
        try:
            workload()  # warm caches and JIT
            t0 = time.perf_counter()
            workload()
            elapsed = time.perf_counter() - t0
        finally:
            kernels.set_backend(prev)
        print(
            f"{backend:6s}: {elapsed:.2f}s for {num_samples} guided SMC samples "
            f"({elapsed / num_samples * 1e3:.2f} ms each)"
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="8,64,1024")
    ap.add_argument("--repeat", type=int, default=20000)
    ap.add_argument("--end-to-end", action="store_true")
    ap.add_argument("--samples", type=int, default=2000)
    args = ap.parse_args()
    if args.end_to_end:
        end_to_end(args.samples)
    else:
        per_kernel([int(s) for s in args.sizes.split(",")], args.repeat)


if __name__ == "__main__":
    main()

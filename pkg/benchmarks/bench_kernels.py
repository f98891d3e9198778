"""Compare the compiled and numpy kernel backends on telemetry-sized inputs.

    python benchmarks/bench_kernels.py --size 1000000 --repeat 5
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from tsadeval import _pykernels

try:
    from tsadeval import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def workloads(n: int, seed: int):
    rng = np.random.default_rng(seed)
    ts = np.cumsum(rng.integers(1, 60, n)).astype(np.int64)
    labels = (rng.random(n) < 0.01).astype(np.uint8)
    grid = np.arange(ts[0] - ts[0] % 30, ts[-1] + 30, 30, dtype=np.int64)
    mask = (rng.random(n) < 0.3).astype(np.uint8)
    starts = np.sort(rng.integers(0, 50 * n, n // 10)).astype(np.int64)
    ends = starts + rng.integers(0, 100, len(starts))
    a = _pykernels.merge_sorted(starts, ends)
    b = _pykernels.merge_sorted(starts + 37, ends + 37)
    return {
        "merge_sorted": lambda k: k.merge_sorted(starts, ends),
        "mask_runs": lambda k: k.mask_runs(mask),
        "zoh_resample_index": lambda k: k.zoh_resample_index(ts, labels, grid),
        "intersect": lambda k: k.intersect(*a, *b),
        "intersection_measure": lambda k: k.intersection_measure(*a, *b),
    }


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--size", type=int, default=1_000_000, help="samples per workload")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)

    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"size={a.size} repeat={a.repeat} (best of, ms)")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in workloads(a.size, a.seed).items():
        best = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=a.repeat)) * 1e3 for b, k in backends.items()}
        row = f"{name:<22}" + "".join(f"{best[b]:>12.2f}" for b in backends)
        if len(backends) > 1:
            row += f"{best['python'] / best['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()

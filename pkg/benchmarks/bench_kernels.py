"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Needs the extension built (``pip install -e . --no-build-isolation``).
Outputs are checked for equality before timing.
"""
import argparse
import timeit

import numpy as np

from vcc import _kernels_py as py
from vcc.datasets import generate_synthetic, synthetic_splits

try:
    from vcc import _ckernels as cy
except ImportError:
    raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation` first")


def cases(rng):
    mask = rng.random((240, 360)) < 0.08
    mask[60:120, 100:180] = True
    frame = rng.integers(0, 256, (240, 360, 3)).astype(np.float64)
    # noise defeats the early exits of both matchers: worst case
    a = rng.integers(0, 256, (192, 240)).astype(np.int32)
    b = np.roll(a, (2, 3), axis=(0, 1))
    _, test = synthetic_splits(0, n_train=0, n_test=1)
    frames = generate_synthetic(test[0])[0].frames[..., 0].astype(np.int32)
    return {
        "component_boxes 240x360": (lambda k: k.component_boxes(mask)),
        "resize_bilinear 240x360x3 -> 32x32": (lambda k: k.resize_bilinear(frame, 32, 32)),
        "resize_bilinear 57x41x3 -> 32x32": (lambda k: k.resize_bilinear(frame[:57, :41], 32, 32)),
        "block_match 192x240 r=8, noise": (lambda k: k.block_match(a, b, 8, 1, 8)),
        "block_match 192x240 r=8, synthetic": (lambda k: k.block_match(frames[45], frames[46], 8, 1, 8)),
    }


def same(x, y):
    if isinstance(x, np.ndarray):
        return np.allclose(x, y, rtol=0, atol=1e-9)
    return sorted(map(tuple, x)) == sorted(map(tuple, y))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        if not same(fn(py), fn(cy)):
            raise SystemExit(f"{name}: backends disagree")
        n = 1 if "block_match" in name else 10
        t_py = min(timeit.repeat(lambda: fn(py), number=n, repeat=args.repeat)) / n * 1e3
        t_cy = min(timeit.repeat(lambda: fn(cy), number=n, repeat=args.repeat)) / n * 1e3
        print(f"{name:40s} {t_py:10.2f} {t_cy:10.2f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()

"""Time the compiled and numpy kernel backends on modulator-sized inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``.
"""
import argparse
import timeit

import numpy as np

from dpfbmc import kernels, modem
from dpfbmc.filters import design_filter


def _cases(N, K, M, rng):
    f = design_filter("srrc", K, N)
    h = np.ascontiguousarray(f.coeffs)
    hop = N // 2
    segs = rng.standard_normal((M, K * N)) + 1j * rng.standard_normal((M, K * N))
    y = rng.standard_normal(K * N + (M - 1) * hop) + 1j * rng.standard_normal(K * N + (M - 1) * hop)
    a = rng.standard_normal((N, min(M, 8)))
    freqs = modem.signed_frequencies(N).astype(float)
    return {
        "overlap_add": lambda mod: mod.overlap_add(segs, hop),
        "polyphase_fold": lambda mod: mod.polyphase_fold(y, h, M, hop, N),
        "direct_synthesis": lambda mod: mod.direct_synthesis(a, h, freqs, f.center, hop),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--N", type=int, default=512)
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--M", type=int, default=32)
    args = ap.parse_args(argv)
    impls = kernels.backends()
    cases = _cases(args.N, args.K, args.M, np.random.default_rng(0))
    print(f"N={args.N} K={args.K} M={args.M}; selected backend: {kernels.BACKEND}")
    print(f"{'kernel':<18}" + "".join(f"{name:>14}" for name in impls) + ("       speedup" if len(impls) > 1 else ""))
    for label, fn in cases.items():
        times = {}
        for name, mod in impls.items():
            n = 3 if label == "direct_synthesis" else 20
            times[name] = min(timeit.repeat(lambda: fn(mod), number=n, repeat=args.repeat)) / n
        row = f"{label:<18}" + "".join(f"{times[name] * 1e3:>11.3f} ms" for name in impls)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>13.1f}x"
        print(row)


if __name__ == "__main__":
    main()

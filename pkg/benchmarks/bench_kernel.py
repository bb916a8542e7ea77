"""Compare the compiled and pure-Python kernel backends.

Times kernel assembly and the symmetric matrix-vector product for a few
problem sizes and checks that both backends give the same kernel.

    python benchmarks/bench_kernel.py --sizes 1000,2000 --repeat 3
"""
import argparse
import time

import numpy as np

from puncturing.kernel import available_backends, build_kernel, matvec
from puncturing.masks import MaskConfig, gen_data_mask, gen_kernel_mask


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def run(sizes, eps_s, eps_b, repeat, matvecs):
    backends = available_backends()
    rows = []
    for n in sizes:
        p = n
        rng = np.random.default_rng(n)
        x = rng.standard_normal((p, n))
        cfg = MaskConfig(eps_s, eps_b, 1, seed=n)
        s, bm = gen_data_mask(p, n, cfg), gen_kernel_mask(n, cfg)
        v = rng.standard_normal(n)
        kernels = {}
        for be in backends:
            t_build, k = _best(lambda: build_kernel(x, s, bm, backend=be), repeat)
            matvec(k, v)  # warm caches
            t_mv, _ = _best(lambda: [matvec(k, v) for _ in range(matvecs)], repeat)
            kernels[be] = k
            rows.append((n, be, t_build, t_mv / matvecs, k.flop_count))
        if len(kernels) == 2:
            a, b = kernels.values()
            err = np.max(np.abs(a.values - b.values)) / max(np.max(np.abs(b.values)), 1e-300)
            print(f"n={n}: max relative difference between backends {err:.2e}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="500,1000,2000")
    ap.add_argument("--eps-s", type=float, default=0.2)
    ap.add_argument("--eps-b", type=float, default=0.4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--matvecs", type=int, default=20)
    args = ap.parse_args()
    sizes = [int(t) for t in args.sizes.split(",")]
    rows = run(sizes, args.eps_s, args.eps_b, args.repeat, args.matvecs)
    print(f"{'n=p':>6} {'backend':>9} {'build [s]':>10} {'matvec [ms]':>12} {'Mflop/s':>9}")
    for n, be, tb, tm, flops in rows:
        print(f"{n:>6} {be:>9} {tb:>10.3f} {1e3 * tm:>12.3f} {flops / tb / 1e6:>9.1f}")


if __name__ == "__main__":
    main()

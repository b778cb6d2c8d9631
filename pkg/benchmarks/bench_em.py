"""Time the EM hot loop and the posterior-mean kernel on each available backend.

    python3 benchmarks/bench_em.py [--n 1000 4000] [--iters 100] [--repeat 5]
"""
import argparse
import time

import numpy as np

from gmleb import _backend
from gmleb.npmle import build_grid_paper


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(kern, X, iters, repeat):
    g = build_grid_paper(X)
    K, _ = kern.kernel_matrix(X, g.points)
    w0 = np.full(len(g.points), 1.0 / len(g.points))

    def em():
        w, out = w0.copy(), np.empty_like(w0)
        for _ in range(iters):
            kern.em_step(K, w, out)
            w, out = out, w
        return w

    logw = np.log(em())
    return {
        "kernel_matrix": best_of(lambda: kern.kernel_matrix(X, g.points), repeat),
        f"em x{iters}": best_of(em, repeat),
        "posterior_mean": best_of(lambda: kern.log_density_and_mean(X, g.points, logw), repeat),
    }, em()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 4000])
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = _backend.available()
    print(f"backends: {', '.join(names)} (default {_backend.BACKEND})")
    for n in args.n:
        rng = np.random.default_rng(n)
        X = np.where(np.arange(n) < n // 20, 5.0, 0.0) + rng.standard_normal(n)
        results, weights = {}, {}
        for name in names:
            results[name], weights[name] = bench(_backend.load(name), X, args.iters, args.repeat)
        print(f"\nn={n}, grid={len(build_grid_paper(X).points)}")
        print(f"{'stage':<16}" + "".join(f"{nm:>12}" for nm in names)
              + ("     speedup" if len(names) > 1 else ""))
        for stage in results[names[0]]:
            row = [results[nm][stage] for nm in names]
            line = f"{stage:<16}" + "".join(f"{t * 1e3:>10.1f}ms" for t in row)
            if len(names) > 1:
                line += f"{row[-1] / row[0]:>11.2f}x"
            print(line)
        if len(names) > 1:
            diff = np.abs(weights[names[0]] - weights[names[1]]).max()
            print(f"max weight difference after EM: {diff:.2e}")


if __name__ == "__main__":
    main()

"""Compare the compiled kernels with the numpy fallback on desk-scale inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""
import argparse
import timeit

import numpy as np

from kchase.core import Metric
from kchase.kernels import backends
from kchase.kserver import ConfigSpace
from kchase.regret import tuples_of


def cases(quick=False):
    rng = np.random.default_rng(0)
    n, k, T = (8, 2, 40) if quick else (10, 3, 200)
    sp = ConfigSpace(Metric.from_points(rng.random((n, 2))), k)
    req = rng.integers(0, n, T).astype(np.int64)
    w0 = sp.match_from(sp.configs[0])
    G, TH = (21, 200) if quick else (51, 1000)
    L = rng.random((TH, G))
    tup = tuples_of(G, 2)
    u = rng.random(TH)
    serve = rng.random((T, sp.size))
    return {
        "relax_moves": lambda m: m.relax_moves(w0, sp.replace, sp.cost, k),
        "wfa_run": lambda m: m.wfa_run(w0, 0, req, sp.replace, sp.cost, sp.contains),
        "opt_run": lambda m: m.opt_run(0, req, sp.replace, sp.cost, sp.contains),
        "serve_dp_run": lambda m: m.serve_dp_run(0, serve, sp.replace, sp.cost),
        "hedge_run": lambda m: m.hedge_run(L, tup, 0.1, u),
        "ftl_run": lambda m: m.ftl_run(L, tup),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)
    impls = backends()
    names = sorted(impls)
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in names) + "     speedup")
    rows = {}
    for kname, fn in cases(args.quick).items():
        t = {b: min(timeit.repeat(lambda: fn(impls[b]), number=1, repeat=args.repeat))
             for b in names}
        rows[kname] = t
        sp = t["python"] / t["cython"] if "cython" in t and t["cython"] > 0 else float("nan")
        print(f"{kname:<14}" + "".join(f"{t[b] * 1e3:>10.2f}ms" for b in names) + f"{sp:>11.1f}x")
    return rows


if __name__ == "__main__":
    main()

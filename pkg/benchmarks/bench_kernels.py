"""Compare the compiled kernel with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 5000]

Times the incomplete Beta, one M-step shape search and a full EM fit under
each backend. The EM timing runs in a subprocess per backend because the
backend is chosen at import time.
"""

import argparse
import json
import math
import os
import subprocess
import sys
import timeit

import numpy as np

from pvalmix import _kernels_py

try:
    from pvalmix import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

EM_SNIPPET = """
import json, time
from pvalmix.em import run_em
from pvalmix.model import MixtureParams
from pvalmix.numerics import BACKEND
from pvalmix.simulate import SimConfig, simulate_observations
obs, _, _ = simulate_observations(SimConfig({n}, MixtureParams.make(0.14, 0.5, 25), 0.2, 0.2, 1))
best = float("inf")
for _ in range({repeat}):
    t = time.perf_counter()
    fit = run_em(obs)
    best = min(best, time.perf_counter() - t)
print(json.dumps({{"backend": BACKEND, "seconds": best, "iterations": fit.iterations}}))
"""


def shape_problem(seed=0, n=2000):
    rng = np.random.default_rng(seed)
    x = 0.05 * rng.beta(0.6, 3.0, n)
    w = rng.uniform(0, 1, n)
    lo = np.array([0.0, 0.0, 0.005, 0.015, 0.025, 0.035, 0.045])
    hi = np.array([0.01, 0.005, 0.015, 0.025, 0.035, 0.045, 0.05])
    return (0.0, math.log(10.0), 0.05, w.sum(), (w * np.log(x)).sum(), (w * np.log1p(-x)).sum(),
            lo, hi, rng.integers(1, 200, 7).astype(float), 1e-6, 500, 0.1,
            math.log(1e-4), math.log(1e4))


def bench_kernel(mod, repeat):
    rng = np.random.default_rng(0)
    args = [(float(a), float(b), float(x)) for a, b, x in
            zip(np.exp(rng.uniform(-3, 5, 2000)), np.exp(rng.uniform(-3, 5, 2000)), rng.uniform(0, 1, 2000))]
    inc = min(timeit.repeat(lambda: [mod.incbeta(*t) for t in args], number=1, repeat=repeat)) / len(args)
    prob = shape_problem()
    fit = min(timeit.repeat(lambda: mod.fit_shape(*prob), number=1, repeat=repeat))
    return {"incbeta_us": inc * 1e6, "fit_shape_ms": fit * 1e3}


def bench_em(pure, n, repeat):
    env = dict(os.environ, PVALMIX_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", EM_SNIPPET.format(n=n, repeat=repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--n", type=int, default=5000, help="observations in the EM benchmark")
    args = parser.parse_args()

    rows = [("python", bench_kernel(_kernels_py, args.repeat), bench_em(True, args.n, args.repeat))]
    if _kernels_c is not None:
        rows.append(("cython", bench_kernel(_kernels_c, args.repeat), bench_em(False, args.n, args.repeat)))
    else:
        print("compiled kernel not built; showing the fallback only")

    print(f"{'backend':<8} {'incbeta (us)':>13} {'fit_shape (ms)':>15} {'run_em n=%d (s)' % args.n:>18}")
    for name, k, em in rows:
        print(f"{name:<8} {k['incbeta_us']:13.2f} {k['fit_shape_ms']:15.2f} {em['seconds']:18.3f}")
    if len(rows) == 2:
        (_, kp, ep), (_, kc, ec) = rows
        print(f"speedup  {kp['incbeta_us'] / kc['incbeta_us']:13.1f}x {kp['fit_shape_ms'] / kc['fit_shape_ms']:14.1f}x "
              f"{ep['seconds'] / ec['seconds']:17.1f}x")


if __name__ == "__main__":
    main()

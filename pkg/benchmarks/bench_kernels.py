"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--n 150 300 600] [--repeat 5]

Reports the best-of-``repeat`` wall time of smoother construction and of a
full joint-penalty fit for each sample size, plus the maximum difference
between the two backends' fitted components.
"""

import argparse
import time

import numpy as np

from cram import _backend, _fallback
from cram.core import fit
from cram.data import standardize
from cram.experiments import SyntheticSpec, generate_synthetic, synthetic_config
from cram.smoothing import SmootherSpec, build_smoother

try:
    from cram import _ext
except ImportError:
    _ext = None


def use(module):
    _backend.local_linear_weights = module.local_linear_weights
    _backend.run_sweeps = module.run_sweeps


def best_time(func, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[150, 300, 600])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--lam", type=float, default=0.3)
    args = parser.parse_args()
    if _ext is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    backends = [("python", _fallback), ("cython", _ext)]
    print(f"{'n':>6} {'kernel':>8} {'python_s':>10} {'cython_s':>10} {'speedup':>8}")
    for n in args.n:
        data = standardize(generate_synthetic(SyntheticSpec(n=n, seed=0)))
        config = synthetic_config("joint", args.lam)
        x = np.ascontiguousarray(data.x[:, 0])

        smooth, fits = {}, {}
        for name, module in backends:
            use(module)
            smooth[name], _ = best_time(lambda: build_smoother(x, SmootherSpec("gaussian", 0.3)), args.repeat)
            fits[name] = best_time(lambda: fit(data, config), args.repeat)
        gap = max(np.abs(a - b).max() for a, b in zip(fits["python"][1].components, fits["cython"][1].components))

        for label, table in (("smoother", smooth), ("fit", {k: v[0] for k, v in fits.items()})):
            py, cy = table["python"], table["cython"]
            print(f"{n:>6} {label:>8} {py:>10.4f} {cy:>10.4f} {py / cy:>7.1f}x")
        print(f"{n:>6} {'max|dM|':>8} {gap:>10.1e}  sweeps={fits['cython'][1].diagnostics.sweeps_run}")


if __name__ == "__main__":
    main()

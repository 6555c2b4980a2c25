"""Time the numba and numpy KL kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --rows 4000 --repeat 5
"""
import argparse
import timeit

import numpy as np

from subpop_uda import _accel
from subpop_uda.kernels import IMPLEMENTATIONS
from subpop_uda.proportions import KL_MARGIN, KL_SCAN_POINTS, KL_TOL


def cases(rows, seed):
    rng = np.random.default_rng(seed)
    xi0 = rng.beta(2, 2, size=rows)
    b1, rho = 0.5, 0.5
    scan = np.linspace(KL_MARGIN * rho, (1 - KL_MARGIN) * rho, KL_SCAN_POINTS)
    dense = np.linspace(KL_MARGIN * rho, (1 - KL_MARGIN) * rho, 100_000)
    return {
        "scan (256 points)": lambda k: k["kl_objective_grid"](scan, xi0, b1, rho),
        "golden refinement": lambda k: k["kl_golden_max"](xi0, b1, rho, scan[100], scan[140], KL_TOL),
        "dense grid (1e5 points)": lambda k: k["kl_objective_grid"](dense, xi0, b1, rho),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=4000, help="target a=0 rows")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    if not _accel.HAVE_NUMBA:
        print("numba not installed; timing the numpy kernels only")
    for fn in cases(8, args.seed).values():  # trigger jit compilation outside the timings
        for name in backends:
            fn(IMPLEMENTATIONS[name])

    print(f"rows={args.rows}, best of {args.repeat}")
    print(f"{'kernel':26s}" + "".join(f"{b:>12s}" for b in backends) + ("     speed-up" if len(backends) > 1 else ""))
    for label, fn in cases(args.rows, args.seed).items():
        times = [min(timeit.repeat(lambda: fn(IMPLEMENTATIONS[b]), number=1, repeat=args.repeat))
                 for b in backends]
        line = f"{label:26s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) > 1:
            line += f"{times[0] / times[1]:12.1f}x"
        print(line)


if __name__ == "__main__":
    main()

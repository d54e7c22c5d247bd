"""Compare the compiled and pure-Python pair energy/gradient kernels.

Run with ``python benchmarks/bench_kernels.py [--radii 16 32 64] [--repeat 20]``.
"""

import argparse
import time

import numpy as np

from dislocbc import kernels
from dislocbc.cellsolve import CellProblem, assemble_predictor
from dislocbc.models import build_model


def bench(prob, backend, repeat):
    pot = prob.model.potential
    tab = prob.table
    U = prob.full_values(np.zeros(len(prob.free_sites) * prob.N))
    k, a, b = pot.coefficient_arrays()
    args = (U, tab.site_idx, tab.partner, tab.jump, pot.cart, k, a, b, True)
    kernels.pair_energy_gradient(*args, backend=backend)  # warm up
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = kernels.pair_energy_gradient(*args, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radii", type=float, nargs="+", default=[16, 32, 64])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--edge", action="store_true", help="benchmark the two-component (edge) kernel")
    args = ap.parse_args()
    model = build_model({"dislocation": {"kind": "edge"}} if args.edge else None)
    if kernels.BACKEND != "cython":
        print("compiled kernel unavailable; only the Python backend is timed")
    print(f"{'R':>6} {'bonds':>9} {'python [ms]':>12} {'cython [ms]':>12} {'speed-up':>9} {'max |dE|':>10}")
    for R in args.radii:
        prob = CellProblem(model, 0, R, assemble_predictor(0, model.predictor))
        nb = prob.table.partner.size
        tp, (Ep, Gp) = bench(prob, "python", args.repeat)
        if kernels.BACKEND == "cython":
            tc, (Ec, Gc) = bench(prob, "cython", args.repeat)
            diff = max(abs(Ep - Ec), float(np.max(np.abs(Gp - Gc))))
            print(f"{R:6g} {nb:9d} {tp * 1e3:12.3f} {tc * 1e3:12.3f} {tp / tc:9.1f} {diff:10.2e}")
        else:
            print(f"{R:6g} {nb:9d} {tp * 1e3:12.3f} {'-':>12} {'-':>9} {'-':>10}")


if __name__ == "__main__":
    main()

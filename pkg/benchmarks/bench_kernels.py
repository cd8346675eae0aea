"""Compiled vs pure-Python kernels on the default 100x200 problem.

    python3 benchmarks/bench_kernels.py [--horizon 5] [--repeat 3]
"""

import argparse
import time

import numpy as np

import assr.auxiliary as aux_mod
from assr import _kernels_py
from assr._backend import BACKEND, kernels
from assr.auxiliary import AuxiliaryConfig, integrate
from assr.harness import ExperimentSpec, make_problem
from assr.penalty import Penalty
from assr.spiking import SpikingConfig, run


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=5.0, help="spiking horizon in time units")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if BACKEND != "cython":
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    problem = make_problem(ExperimentSpec(), 0)
    pen = Penalty.exponential(1.0)
    cfg = SpikingConfig(tau=0.5, lam=0.1, horizon=args.horizon)
    print(f"problem {problem.m}x{problem.n}, {cfg.resolved().n_steps} spiking ticks")

    rows = []
    t_c, tr_c = best_of(lambda: run(problem, pen, cfg, backend=kernels), args.repeat)
    t_p, tr_p = best_of(lambda: run(problem, pen, cfg, backend=_kernels_py), args.repeat)
    same = np.array_equal(tr_c.raster.times, tr_p.raster.times)
    rows.append(("spiking", t_c, t_p, same))

    aux_cfg = AuxiliaryConfig(tau=0.5, lam=0.1, horizon=50.0)
    t_c, a_c = best_of(lambda: integrate(problem, pen, aux_cfg), args.repeat)
    aux_mod.kernels = _kernels_py
    try:
        t_p, a_p = best_of(lambda: integrate(problem, pen, aux_cfg), args.repeat)
    finally:
        aux_mod.kernels = kernels
    rows.append(("auxiliary", t_c, t_p, bool(np.allclose(a_c.final.a, a_p.final.a,
                                                          rtol=1e-10, atol=1e-12))))

    print(f"{'kernel':<10} {'cython s':>10} {'python s':>10} {'speedup':>8}  agree")
    for name, c, p, ok in rows:
        print(f"{name:<10} {c:>10.4f} {p:>10.4f} {p / c:>8.1f}  {ok}")


if __name__ == "__main__":
    main()

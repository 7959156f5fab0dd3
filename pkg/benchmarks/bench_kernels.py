"""Time the compiled kernels against the pure-Python fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from elastiq.market import kernels as thermal_kernels
from elastiq.market.consumers import DT_HOURS, ThermalParams
from elastiq.nn import NetworkMeta, init_params
from elastiq.nn import kernels as lstm_kernels


def lstm_case(batch=256, t_in=25, n_cell=32):
    params = init_params(NetworkMeta(n_cell=n_cell, n_den=32, t_in=t_in), seed=0)
    Wx, Vh, b = params.cell.fused()
    X = np.random.default_rng(0).uniform(0, 1, (t_in, batch, 9))
    return X, Wx, Vh, b


def thermal_case():
    th = ThermalParams()
    r = np.random.default_rng(1)
    lam, temps = r.uniform(20, 90, 9), r.uniform(24, 36, 9)
    return (lam, temps, 23.5, th.a, th.g, th.band_lo, th.band_hi, th.softness, th.weight, DT_HOURS,
            th.hvac_max, np.zeros(9), th.effort, th.tol, th.max_sweeps)


def bench(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    X, Wx, Vh, b = lstm_case()
    rows = []
    backends = ["python"] + (["compiled"] if lstm_kernels.BACKEND == "compiled" else [])
    for name in backends:
        fwd, bwd = lstm_kernels.get_backend(name)
        gates, C, Hs, TC = fwd(X, Wx, Vh, b)
        dH = np.ones_like(Hs[1:])
        rows.append(("lstm forward (B=256, T=25, H=32)", name, bench(lambda: fwd(X, Wx, Vh, b), args.repeat)))
        rows.append(("lstm backward", name, bench(lambda: bwd(X, Vh, gates, C, Hs, TC, dH), args.repeat)))

    case = thermal_case()
    backends = ["python"] + (["compiled"] if thermal_kernels.BACKEND == "compiled" else [])
    for name in backends:
        solve = thermal_kernels.get_solver(name)
        rows.append(("thermal solve (9-step horizon)", name, bench(lambda: solve(*case), args.repeat)))

    base = {task: t for task, name, t in rows if name == "python"}
    print(f"{'kernel':36s} {'backend':9s} {'seconds':>10s} {'speedup':>8s}")
    for task, name, t in rows:
        print(f"{task:36s} {name:9s} {t:10.5f} {base[task] / t:8.1f}x")


if __name__ == "__main__":
    main()

"""Compare the compiled kernels with the pure-Python fallback.

Runs each loop on both backends with the same seed, checks that the
trajectories agree bitwise and prints steps per second.

    python benchmarks/bench_kernels.py --steps 5000
"""

import argparse
import time

import numpy as np

from banditgames._kernels import compiled_available
from banditgames.algorithms import run_bandit_mirror_descent, run_entropy_bandit_omd, run_optimistic_regularized_ew
from banditgames.library import make_cournot, make_matrix_game
from banditgames.schedules import make_schedule

A = np.array([[1.0, 2.0], [3.0, 4.0]])


def cases(T):
    cournot = make_cournot()
    sched = make_schedule("strongly_monotone_main", d=1)
    linear = make_matrix_game(A)
    lin_sched = make_schedule("linear_tau", d=1, T=T)
    tau = T ** (-1.0 / 6.0)
    eta = T ** (-7.0 / 12.0)
    return {
        "cournot bandit md": lambda b: run_bandit_mirror_descent(cournot, sched, T, seed=1, backend=b),
        "matrix linear md": lambda b: run_bandit_mirror_descent(linear, lin_sched, T, seed=1, backend=b),
        "entropy omd": lambda b: run_entropy_bandit_omd(A, eta, tau, tau, T, 1, backend=b),
        "optimistic ew": lambda b: run_optimistic_regularized_ew(A, eta, tau, tau, 0.5, T, 1, backend=b),
    }


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not compiled_available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'loop':<20}{'compiled s':>12}{'python s':>12}{'speedup':>10}{'steps/s':>14}  bitwise")
    for name, run in cases(args.steps).items():
        tc, a = timed(lambda: run("compiled"), args.repeat)
        tp, b = timed(lambda: run("python"), 1)
        same = all(np.array_equal(x, y) for x, y in zip(a.iterates, b.iterates))
        print(f"{name:<20}{tc:>12.4f}{tp:>12.3f}{tp / tc:>10.0f}{args.steps / tc:>14.0f}  {same}")


if __name__ == "__main__":
    main()

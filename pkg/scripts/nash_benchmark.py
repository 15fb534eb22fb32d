"""Equilibrium search on seeded random two-player constrained games.

Prints one line per instance and a success rate. Usage:
    python3 scripts/nash_benchmark.py --instances 50 --seed 0 --eps 1e-4
"""
import argparse
import time

import numpy as np

from csg.instances import random_slater_game
from csg.nash import NashOptions, nash_gap, solve_nash


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--max-sweeps", type=int, default=500)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--mode", choices=["gauss-seidel", "jacobi"], default="gauss-seidel")
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    opts = NashOptions(eps=args.eps, max_sweeps=args.max_sweeps, restarts=args.restarts, mode=args.mode)
    solved = 0
    t0 = time.perf_counter()
    for k in range(args.instances):
        spec = random_slater_game(rng)
        start = time.perf_counter()
        rep = solve_nash(spec, opts)
        check = nash_gap(spec, rep.profile, args.eps)
        solved += rep.converged
        print(f"{k:3d}  S={spec.n_states}  sweeps={rep.sweeps:3d}  max_gap={rep.max_gap:.2e}  "
              f"recheck={check.max_gap:.2e}  {time.perf_counter() - start:.2f}s")
    print(f"certified {solved}/{args.instances} at eps={args.eps:g} in {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

"""Compare Monte Carlo estimates against the exact linear-solve evaluation on random instances.

Usage:
    python3 scripts/mc_oracle.py --instances 200 --episodes 100000 --seed 0
"""
import argparse

import numpy as np

from csg.evaluation import evaluate_exact, evaluate_mc
from csg.instances import random_spec
from csg.model import MultiStrategy


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--episodes", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    z_all = []
    for k in range(args.instances):
        spec = random_spec(rng, n_players=1 + k % 2)
        phi = MultiStrategy.dirichlet(spec, rng)
        exact = evaluate_exact(spec, phi).J
        mc = evaluate_mc(spec, phi, args.episodes, seed=k, workers=args.workers)
        noisy = mc.stderr > 1e-12
        z = np.abs(mc.estimate - exact)[noisy] / mc.stderr[noisy]
        z_all.extend(z.tolist())
        print(f"{k:3d}  S={spec.n_states}  max|z|={z.max() if z.size else 0.0:.2f}  "
              f"max|dev|={np.abs(mc.estimate - exact).max():.2e}")
    z_all = np.array(z_all)
    print(f"{len(z_all)} noisy entries, share within 2 sigma {np.mean(z_all <= 2):.3f}, "
          f"within 4 sigma {np.mean(z_all <= 4):.4f}")


if __name__ == "__main__":
    main()

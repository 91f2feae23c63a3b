"""Convergence of the rescaled AMSE gap to its small-noise limit.

Prints (amse - sigma_w^2/(1-1/delta)) / sigma_w^4 next to the predicted
limit -delta^3 C_q/(delta-1)^3 for a few priors and exponents.

    python scripts/small_noise_table.py [--delta 2]
"""
import argparse

from bridgelab import theory
from bridgelab.dist import ExpTailMagnitude, PointMassSet, UniformMagnitude
from bridgelab.se import solve

PRIORS = {
    "point mass 1": PointMassSet(((1.0, 1.0),)),
    "uniform [0,1]": UniformMagnitude(1.0),
    "exp tail (1, 1)": ExpTailMagnitude(1.0, 1.0),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--q", type=float, nargs="+", default=[1.5, 2.0])
    ap.add_argument("--sigma", type=float, nargs="+", default=[0.1, 0.05, 0.025, 0.0125])
    args = ap.parse_args()
    d = args.delta
    for name, dist in PRIORS.items():
        for q in args.q:
            target = theory.small_noise_limit(q, d, dist)
            cells = []
            for sw in args.sigma:
                amse = solve(q, d, sw, dist).amse
                cells.append(f"{(amse - sw**2 / (1 - 1 / d)) / sw**4:9.4f}")
            print(f"{name:16s} q={q:<4g} limit={target:9.4f} | " + " ".join(cells))


if __name__ == "__main__":
    main()

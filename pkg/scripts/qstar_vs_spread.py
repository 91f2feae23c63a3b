"""Best exponent q* for two-point priors as the ratio mu2/mu1 grows.

    python scripts/qstar_vs_spread.py [--alpha 0.5]
"""
import argparse
import math

from bridgelab.dist import TwoPointMagnitude
from bridgelab.theory import q_star


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--ratios", type=float, nargs="+", default=[1, 3, 10, 30, 100, 300, 1000, 1e4, 1e6])
    args = ap.parse_args()
    print("ratio      q*       1 + 1/ln(ratio)")
    for k in args.ratios:
        q, _ = q_star(TwoPointMagnitude(1.0, k, args.alpha))
        proxy = 1.0 + 1.0 / math.log(k) if k > math.e else float("nan")
        print(f"{k:<10g} {q:.4f}   {proxy:.4f}")


if __name__ == "__main__":
    main()

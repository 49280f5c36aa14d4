"""Monte-Carlo percentile interval for the estimates at given parameters.

    python3 scripts/mc_interval.py --L 3770 --T 3770 --realizations 1000 --seed 8
"""
import argparse
import json
import sys

from lncascade import ModelParams
from lncascade.estimate import mc_confidence_interval


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, default=3770.0)
    ap.add_argument("--T", type=float, default=3770.0)
    ap.add_argument("--lambda2", type=float, default=0.02)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--estimator", default="gmm", choices=["gmm", "hf_lambda2", "hf_lambda2_ols"])
    ap.add_argument("--realizations", type=int, default=1000)
    ap.add_argument("--level", type=float, default=0.95)
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--l-ratio", type=int, default=128)
    args = ap.parse_args()

    params = ModelParams(sigma=args.sigma, lambda2=args.lambda2, T=args.T)
    tick = max(1, args.realizations // 20)
    progress = lambda i: (i + 1) % tick == 0 and print(f"{i + 1}/{args.realizations}", file=sys.stderr)
    res = mc_confidence_interval(params, args.L, args.estimator, args.realizations, args.level,
                                 seed=args.seed, l_ratio=args.l_ratio, progress=progress)
    print(json.dumps({"params": params.to_dict(), "L": args.L, **res.to_dict()}, indent=2))


if __name__ == "__main__":
    main()

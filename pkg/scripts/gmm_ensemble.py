"""Bias and RMSE of the GMM estimates over simulated ensembles, one row per window length.

    python3 scripts/gmm_ensemble.py --L 2048 4096 8192 --realizations 100 --seed 1
"""
import argparse
import json
import math
import time

import numpy as np

from lncascade import ModelParams
from lncascade.estimate import GmmConfig, gmm_estimate
from lncascade.simulate import SimulationSpec, simulate_mrw


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, nargs="+", default=[2048, 4096, 8192])
    ap.add_argument("--realizations", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--lambda2", type=float, default=0.02)
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--l-ratio", type=int, default=128)
    args = ap.parse_args()

    params = ModelParams(lambda2=args.lambda2, T=args.T)
    truth = np.array(params.theta)
    print("L,coord,mean,bias,rmse,seconds")
    for L in args.L:
        spec = SimulationSpec(params, L, args.seed, l_ratio=args.l_ratio)
        t0 = time.perf_counter()
        th = np.array([gmm_estimate(simulate_mrw(spec, i).values, params.tau, GmmConfig()).theta_hat
                       for i in range(args.realizations)])
        dt = time.perf_counter() - t0
        for j, name in enumerate(("ln_sigma", "lambda2", "ln_T")):
            err = th[:, j] - truth[j]
            print(f"{L},{name},{th[:, j].mean():.6g},{err.mean():.3g},{math.sqrt(np.mean(err**2)):.3g},{dt:.1f}")
    print("# " + json.dumps({"params": params.to_dict(), "seed": args.seed, "l_ratio": args.l_ratio}))


if __name__ == "__main__":
    main()

"""Rolling VaR backtests on simulated paths: violation counts and coverage-test pass counts.

    python3 scripts/var_backtest.py --paths 29 --n 4096 --p 0.01 0.05
"""
import argparse

import numpy as np

from lncascade import ModelParams
from lncascade.risk import run_var_backtest
from lncascade.simulate import SimulationSpec, simulate_mrw


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=29)
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--p", type=float, nargs="+", default=[0.01, 0.05])
    ap.add_argument("--scale", type=float, nargs="+", default=[1.0])
    ap.add_argument("--window", type=int, default=512)
    ap.add_argument("--lambda2", type=float, default=0.02)
    ap.add_argument("--T", type=float, default=None, help="defaults to the path length")
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()

    params = ModelParams(lambda2=args.lambda2, T=args.T or float(args.n))
    spec = SimulationSpec(params, args.n, args.seed)
    paths = [simulate_mrw(spec, i).values for i in range(args.paths)]
    print("p,scale,violation_rate,kupiec_accepted,christoffersen_accepted,paths")
    for s in args.scale:
        for p in args.p:
            reps = [run_var_backtest(x, params, p, s, s, args.window) for x in paths]
            rate = np.mean([r.violation_rate for r in reps])
            k = sum(r.kupiec_pass for r in reps)
            c = sum(r.christoffersen_pass for r in reps)
            print(f"{p},{s},{rate:.4f},{k},{c},{len(reps)}")


if __name__ == "__main__":
    main()

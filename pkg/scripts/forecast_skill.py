"""Model-based volatility forecasts against the unconditional mean, for the three transforms.

    python3 scripts/forecast_skill.py --paths 20 --n 8192 --scale 1 4 16
"""
import argparse
import math

import numpy as np

from lncascade import ModelParams
from lncascade.forecast import PredictorSpec, forecast_errors
from lncascade.simulate import SimulationSpec, simulate_mrw


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20)
    ap.add_argument("--n", type=int, default=8192)
    ap.add_argument("--scale", type=float, nargs="+", default=[1.0, 4.0, 16.0])
    ap.add_argument("--window", type=int, default=512)
    ap.add_argument("--lambda2", type=float, default=0.02)
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--seed", type=int, default=10)
    args = ap.parse_args()

    params = ModelParams(lambda2=args.lambda2, T=args.T)
    spec = SimulationSpec(params, args.n, args.seed)
    paths = [simulate_mrw(spec, i).values for i in range(args.paths)]
    print("kind,scale,metric,model_over_baseline,se")
    for s in args.scale:
        for kind in ("Lin", "Sq", "Log"):
            pspec = PredictorSpec(kind, params, scale_s=s, horizon_h=s, window_P=args.window)
            errs = [forecast_errors(x, pspec) for x in paths]
            for metric in ("MAE", "MSE"):
                r = np.array([e[metric]["model"] / e[metric]["baseline"] for e in errs])
                print(f"{kind},{s},{metric},{r.mean():.4f},{r.std(ddof=1) / math.sqrt(r.size):.4f}")


if __name__ == "__main__":
    main()

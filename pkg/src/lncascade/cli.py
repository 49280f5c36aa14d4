"""Command-line entry point.

Every subcommand resolves its options as: built-in defaults, then the JSON file given
by ``--config`` (a flat object, or a ``RunConfig`` dump), then explicit flags. The
resolved configuration and the library version are embedded in every output. On
failure a JSON error object is written to stderr and the exit status is nonzero
(2 for invalid input or configuration, 1 otherwise).
"""
from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core_model import ModelParams

MODEL_DEFAULTS = {"sigma": 1.0, "lambda2": 0.02, "T": 200.0, "tau": 1.0}

COMMAND_DEFAULTS = {
    "simulate": {"n": 8192, "paths": 1, "kind": "mrw_increments", "l_ratio": 128,
                 "sampler": "circulant", "out": "-", "binary": None},
    "estimate": {"input": None, "input_kind": "returns", "column": 0, "tick_size": 0.01,
                 "lags": None, "regime_band": 1.0, "out": "-"},
    "hf-lambda2": {"input": None, "input_kind": "returns", "column": 0, "tick_size": 0.01,
                   "n": 2, "nprime": 16, "lagset": None, "out": "-"},
    "forecast": {"input": None, "input_kind": "returns", "column": 0, "tick_size": 0.01,
                 "kind": "Log", "scale": None, "horizon": None, "window": 512, "out": "-"},
    "var-backtest": {"input": None, "input_kind": "returns", "column": 0, "tick_size": 0.01,
                     "p": [0.01, 0.05], "scale": None, "horizon": None, "window": 512,
                     "out": "-", "summary_csv": None},
    "cov-table": {"hmax": 150, "out": "-"},
    "mc-ci": {"L": 3770.0, "realizations": 1000, "estimator": "gmm", "level": 0.95,
              "l_ratio": 128, "out": "-"},
}
STOCHASTIC = {"simulate", "mc-ci"}
MODEL_COMMANDS = {"simulate", "forecast", "var-backtest", "cov-table", "mc-ci"}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def _csv_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lncascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lncascade {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p, model=False, data=False):
        p.add_argument("--config", default=S, help="JSON file with option values")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--out", default=S, help="output file ('-' for stdout)")
        if model:
            p.add_argument("--sigma", type=float, default=S)
            p.add_argument("--lambda2", type=float, default=S)
            p.add_argument("--T", type=float, default=S)
            p.add_argument("--tau", type=float, default=S)
        if data:
            p.add_argument("--input", default=S, help="CSV of returns or of timestamp,close prices")
            p.add_argument("--input-kind", dest="input_kind", choices=["returns", "prices"], default=S)
            p.add_argument("--column", type=int, default=S, help="column of a returns CSV")
            p.add_argument("--tick-size", dest="tick_size", type=float, default=S)

    p = sub.add_parser("simulate", help="simulate MRW/MRM paths to CSV")
    common(p, model=True)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--paths", type=int, default=S)
    p.add_argument("--kind", choices=["omega", "mrm_increments", "mrw_increments", "mrw_levels"], default=S)
    p.add_argument("--l-ratio", dest="l_ratio", type=int, default=S)
    p.add_argument("--sampler", choices=["circulant", "cholesky"], default=S)
    p.add_argument("--binary", default=S, help="also write the first path as a binary dump")

    p = sub.add_parser("estimate", help="GMM estimate with regime diagnostic")
    common(p, data=True)
    p.add_argument("--tau", type=float, default=S)
    p.add_argument("--lags", type=_csv_ints, default=S, help="comma-separated lags")
    p.add_argument("--regime-band", dest="regime_band", type=float, default=S)

    p = sub.add_parser("hf-lambda2", help="lambda2 from covariance differences")
    common(p, data=True)
    p.add_argument("--tau", type=float, default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--nprime", type=int, default=S)
    p.add_argument("--lagset", type=_csv_ints, default=S, help="use the least-squares variant")

    p = sub.add_parser("forecast", help="rolling volatility forecasts")
    common(p, model=True, data=True)
    p.add_argument("--kind", choices=["Lin", "Sq", "Log"], default=S)
    p.add_argument("--scale", type=float, default=S)
    p.add_argument("--horizon", type=float, default=S)
    p.add_argument("--window", type=int, default=S)

    p = sub.add_parser("var-backtest", help="rolling VaR with coverage tests")
    common(p, model=True, data=True)
    p.add_argument("--p", type=float, action="append", default=S, help="repeatable")
    p.add_argument("--scale", type=float, default=S)
    p.add_argument("--horizon", type=float, default=S)
    p.add_argument("--window", type=int, default=S)
    p.add_argument("--summary-csv", dest="summary_csv", default=S)

    p = sub.add_parser("cov-table", help="model log-increment covariances")
    common(p, model=True)
    p.add_argument("--hmax", type=int, default=S)

    p = sub.add_parser("mc-ci", help="Monte-Carlo confidence intervals")
    common(p, model=True)
    p.add_argument("--L", type=float, default=S)
    p.add_argument("--realizations", type=int, default=S)
    p.add_argument("--estimator", choices=["gmm", "hf_lambda2", "hf_lambda2_ols"], default=S)
    p.add_argument("--level", type=float, default=S)
    p.add_argument("--l-ratio", dest="l_ratio", type=int, default=S)
    return parser


def resolve_config(command: str, flags: dict) -> "RunConfig":
    from .io import RunConfig

    values = dict(COMMAND_DEFAULTS[command])
    if command in MODEL_COMMANDS or command in ("estimate", "hf-lambda2"):
        values["tau"] = MODEL_DEFAULTS["tau"]
    if command in MODEL_COMMANDS:
        values.update(MODEL_DEFAULTS)
    values["seed"] = None
    if "config" in flags:
        loaded = json.loads(Path(flags["config"]).read_text())
        if "command" in loaded and isinstance(loaded.get("options"), dict):
            loaded = {**loaded["options"], **loaded.get("params", {}), **loaded.get("inputs", {}),
                      **loaded.get("outputs", {}), "seed": loaded.get("seed")}
        unknown = sorted(set(loaded) - set(values))
        if unknown:
            raise ConfigError([f"unknown config key {k!r} for {command}" for k in unknown])
        values.update({k: v for k, v in loaded.items() if v is not None or k == "seed"})
    values.update({k: v for k, v in flags.items() if k not in ("config", "command")})

    problems = []
    if command in STOCHASTIC and values["seed"] is None:
        problems.append(f"--seed is required for {command}")
    if values.get("input_kind") == "prices" and values["seed"] is None:
        problems.append("--seed is required to apply the tick rule to prices")
    if "input" in values and not values["input"]:
        problems.append("--input is required")
    params = {}
    if command in MODEL_COMMANDS:
        params = {k: values.pop(k) for k in ("sigma", "lambda2", "T", "tau")}
        try:
            ModelParams(**params)
        except ValueError as exc:
            problems.append(str(exc))
    if problems:
        raise ConfigError(problems)
    seed = values.pop("seed")
    io_keys = {"input", "out", "binary", "summary_csv"}
    return RunConfig(command, seed, params,
                     {k: values.pop(k) for k in list(values) if k == "input"},
                     {k: values.pop(k) for k in list(values) if k in io_keys},
                     values)


def _header(cfg) -> dict:
    return {"lncascade_version": __version__, "config": json.loads(cfg.to_json())}


@contextlib.contextmanager
def _open_out(target):
    if target in (None, "-"):
        yield sys.stdout
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def _load_series(cfg) -> np.ndarray:
    from .io import ingest_prices, read_returns

    opts = cfg.options
    if opts["input_kind"] == "prices":
        return ingest_prices(cfg.inputs["input"], opts["tick_size"], cfg.seed)
    return read_returns(cfg.inputs["input"], opts["column"])[0]


def _write_json(cfg, payload: dict) -> None:
    with _open_out(cfg.outputs.get("out")) as fh:
        json.dump({**_header(cfg), **payload}, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def cmd_simulate(cfg) -> None:
    from .simulate import SampledPath, SimulationSpec, simulate_ensemble, write_binary, write_paths_csv

    o = cfg.options
    spec = SimulationSpec(ModelParams(**cfg.params), o["n"], cfg.seed, o["sampler"], o["l_ratio"])
    data = simulate_ensemble(spec, o["paths"], o["kind"])
    with _open_out(cfg.outputs.get("out")) as fh:
        write_paths_csv(fh, data, {**_header(cfg), "kind": o["kind"]})
    if cfg.outputs.get("binary"):
        with open(cfg.outputs["binary"], "wb") as fh:
            write_binary(fh, SampledPath(data[0], o["kind"], spec))


def cmd_estimate(cfg) -> None:
    from .estimate import GmmConfig, gmm_estimate

    o = cfg.options
    kw = {"regime_band": o["regime_band"]}
    if o["lags"]:
        kw["lags"] = tuple(o["lags"])
    result = gmm_estimate(_load_series(cfg), o["tau"], GmmConfig(**kw))
    _write_json(cfg, {"result": result.to_dict()})


def cmd_hf_lambda2(cfg) -> None:
    from .estimate import hf_lambda2, hf_lambda2_ols, log_abs_series

    o = cfg.options
    Z = log_abs_series(_load_series(cfg))
    if o["lagset"]:
        out = {"estimator": "least_squares", "lags": o["lagset"], "lambda2": hf_lambda2_ols(Z, o["lagset"])}
    else:
        out = {"estimator": "two_lag", "n": o["n"], "nprime": o["nprime"],
               "lambda2": hf_lambda2(Z, o["n"], o["nprime"], o["tau"])}
    _write_json(cfg, {"result": out})


def cmd_forecast(cfg) -> None:
    from .forecast import PredictorSpec, build_predictor, forecast_series

    o = cfg.options
    params = ModelParams(**cfg.params)
    spec = PredictorSpec(o["kind"], params, o["scale"], o["horizon"], o["window"])
    pred = build_predictor(spec)
    fc = forecast_series(_load_series(cfg), pred)
    with _open_out(cfg.outputs.get("out")) as fh:
        fh.write("# " + json.dumps({**_header(cfg), "prediction_variance": pred.prediction_variance},
                                   sort_keys=True) + "\n")
        cols = ["origin", "target_end", "prediction"] + (["level"] if fc.level is not None else [])
        fh.write(",".join(cols) + "\n")
        end = fc.origins + 1 + spec.horizon_steps
        for i in range(fc.values.size):
            row = [str(int(fc.origins[i])), str(int(end[i])), "%.17g" % fc.values[i]]
            if fc.level is not None:
                row.append("%.17g" % fc.level[i])
            fh.write(",".join(row) + "\n")


def cmd_var_backtest(cfg) -> None:
    from .risk import run_var_backtest

    o = cfg.options
    params = ModelParams(**cfg.params)
    x = _load_series(cfg)
    reports = [run_var_backtest(x, params, p, o["scale"], o["horizon"], o["window"]) for p in o["p"]]
    _write_json(cfg, {"reports": [r.summary() for r in reports]})
    if cfg.outputs.get("summary_csv"):
        keys = ["p", "n_obs", "violations", "violation_rate", "kupiec_stat", "kupiec_pass",
                "christoffersen_stat", "christoffersen_pass"]
        with open(cfg.outputs["summary_csv"], "w") as fh:
            fh.write(",".join(keys) + "\n")
            for r in reports:
                s = r.summary()
                fh.write(",".join(_fmt(s[k]) for k in keys) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def cmd_cov_table(cfg) -> None:
    from .approx import cov_table

    params = ModelParams(**cfg.params)
    table = cov_table(params.tau, params, cfg.options["hmax"])
    with _open_out(cfg.outputs.get("out")) as fh:
        fh.write("# " + json.dumps(_header(cfg), sort_keys=True) + "\n")
        fh.write("h,model_cov,leading_cov\n")
        for h, model, lead in table:
            fh.write(f"{int(h)},{'%.17g' % model},{'%.17g' % lead}\n")


def cmd_mc_ci(cfg) -> None:
    from .estimate import mc_confidence_interval

    o = cfg.options
    params = ModelParams(**cfg.params)
    res = mc_confidence_interval(params, o["L"], o["estimator"], o["realizations"], o["level"],
                                 seed=cfg.seed, l_ratio=o["l_ratio"])
    _write_json(cfg, {"result": res.to_dict()})


COMMANDS = {
    "simulate": cmd_simulate, "estimate": cmd_estimate, "hf-lambda2": cmd_hf_lambda2,
    "forecast": cmd_forecast, "var-backtest": cmd_var_backtest, "cov-table": cmd_cov_table,
    "mc-ci": cmd_mc_ci,
}


def _fail(kind: str, messages: list[str], status: int) -> int:
    json.dump({"error": kind, "messages": messages}, sys.stderr)
    sys.stderr.write("\n")
    return status


def main(argv=None) -> int:
    from .io import InputError

    args = build_parser().parse_args(argv)
    flags = vars(args)
    command = flags.pop("command")
    try:
        cfg = resolve_config(command, flags)
    except ConfigError as exc:
        return _fail("config", exc.problems, 2)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("config", [str(exc)], 2)
    try:
        COMMANDS[command](cfg)
    except InputError as exc:
        return _fail("input", exc.errors, 2)
    except (ValueError, OSError) as exc:
        return _fail(type(exc).__name__, [str(exc)], 2)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        return _fail(type(exc).__name__, [str(exc)], 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())

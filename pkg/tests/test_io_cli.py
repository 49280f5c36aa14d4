import io
import json
import math

import numpy as np
import pytest

from lncascade.approx import cov_table
from lncascade.cli import ConfigError, main, resolve_config
from lncascade.core_model import ModelParams
from lncascade.io import InputError, RunConfig, ingest_prices, read_prices, read_returns, tick_adjust
from lncascade.simulate import ROLE_TICK, rng_for


def test_read_prices_with_header_and_comments():
    text = "# exported\ntimestamp,close\n1,10.0\n2,10.5\n\n3,10.25\n"
    s = read_prices(io.StringIO(text), 0.01, "X")
    np.testing.assert_allclose(s.close, [10.0, 10.5, 10.25])
    assert s.asset_id == "X"
    iso = read_prices(io.StringIO("2024-01-01,5\n2024-01-02,6\n"), 0.01)
    assert iso.timestamps.dtype.kind == "M"


def test_read_prices_reports_every_bad_line():
    text = "t,c\n1,10\n2,abc\n1,11\n4,-1\n5,1,2\n"
    with pytest.raises(InputError) as err:
        read_prices(io.StringIO(text), 0.01)
    msgs = err.value.errors
    assert any(m.startswith("line 3:") and "parse" in m for m in msgs)
    assert any(m.startswith("line 4:") and "increase" in m for m in msgs)
    assert any(m.startswith("line 5:") and "non-positive" in m for m in msgs)
    assert any(m.startswith("line 6:") and "2 columns" in m for m in msgs)
    with pytest.raises(InputError):
        read_prices(io.StringIO("t,c\n1,10\n"), 0.01)
    with pytest.raises(ValueError):
        read_prices(io.StringIO("1,2\n2,3\n"), 0.0)


def test_tick_rule():
    close = np.array([10.0, 10.0, 10.0, 10.5, 10.5])
    adj = tick_adjust(close, 0.01, seed=9)
    coin = rng_for(9, 0, ROLE_TICK)
    expected = close.copy()
    for i in range(1, 5):
        if expected[i] == expected[i - 1]:
            expected[i] += 0.01 if coin.random() < 0.5 else -0.01
    np.testing.assert_array_equal(adj, expected)
    assert np.all(np.diff(adj) != 0)
    np.testing.assert_array_equal(adj, tick_adjust(close, 0.01, seed=9))
    r = ingest_prices(io.StringIO("\n".join(f"{i},{v}" for i, v in enumerate(close))), 0.01, 9)
    np.testing.assert_allclose(r, np.diff(np.log(expected)))


def test_tick_rule_keeps_prices_positive():
    adj = tick_adjust(np.array([0.01, 0.01, 0.01, 0.01]), 0.01, seed=0)
    assert np.all(adj > 0) and np.all(np.diff(adj) != 0)


def test_read_returns():
    vals, meta = read_returns(io.StringIO('# {"a": 1}\nx,y\n1,2\n3,4\n'), column=1)
    np.testing.assert_allclose(vals, [2, 4])
    assert meta == {"a": 1}
    with pytest.raises(InputError):
        read_returns(io.StringIO("1\n2\nfoo\n"))


def test_run_config_round_trip():
    cfg = RunConfig("estimate", 3, {"tau": 1.0}, {"input": "x.csv"}, {"out": "-"}, {"lags": [1, 2]})
    assert RunConfig.from_json(cfg.to_json()) == cfg


def test_resolve_config_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"lambda2": 0.05, "n": 100}))
    cfg = resolve_config("simulate", {"config": str(path), "n": 50, "seed": 1})
    assert cfg.params["lambda2"] == 0.05 and cfg.options["n"] == 50 and cfg.seed == 1
    assert cfg.params["T"] == 200.0
    # a RunConfig dump is accepted as a config file
    path.write_text(cfg.to_json())
    again = resolve_config("simulate", {"config": str(path)})
    assert again == cfg
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ConfigError):
        resolve_config("simulate", {"config": str(path), "seed": 1})
    with pytest.raises(ConfigError):
        resolve_config("simulate", {})
    with pytest.raises(ConfigError):
        resolve_config("cov-table", {"lambda2": 0.7})
    with pytest.raises(ConfigError):
        resolve_config("estimate", {})


def _run(capsys, argv):
    status = main(argv)
    out = capsys.readouterr()
    return status, out.out, out.err


def test_simulate_is_reproducible(capsys, tmp_path):
    argv = ["simulate", "--seed", "4", "--n", "64", "--paths", "2", "--l-ratio", "4", "--T", "32"]
    s1, a, _ = _run(capsys, argv)
    s2, b, _ = _run(capsys, argv)
    assert s1 == s2 == 0 and a == b
    meta = json.loads(a.splitlines()[0][1:])
    assert meta["config"]["seed"] == 4 and "lncascade_version" in meta
    bin_path = tmp_path / "p.bin"
    assert main(argv + ["--binary", str(bin_path), "--out", str(tmp_path / "p.csv")]) == 0
    assert bin_path.stat().st_size == 32 + 8 * 64


def test_missing_seed_is_a_json_error(capsys):
    status, out, err = _run(capsys, ["simulate", "--n", "10"])
    assert status == 2 and out == ""
    payload = json.loads(err)
    assert payload["error"] == "config" and "seed" in payload["messages"][0]


def test_bad_price_file_is_a_json_error(capsys, tmp_path):
    f = tmp_path / "px.csv"
    f.write_text("t,c\n1,10\n1,11\n")
    status, _, err = _run(capsys, ["estimate", "--input", str(f), "--input-kind", "prices", "--seed", "1"])
    assert status == 2
    assert json.loads(err)["error"] == "input"


def test_cov_table_rows_match_library(capsys):
    status, out, _ = _run(capsys, ["cov-table", "--hmax", "20", "--lambda2", "0.03", "--T", "50"])
    assert status == 0
    lines = out.splitlines()
    assert lines[1] == "h,model_cov,leading_cov"
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[2:]])
    np.testing.assert_array_equal(rows, cov_table(1.0, ModelParams(lambda2=0.03, T=50.0), 20))


def test_pipeline_commands(capsys, tmp_path):
    sim = tmp_path / "sim.csv"
    assert main(["simulate", "--seed", "2", "--n", "1200", "--l-ratio", "4", "--out", str(sim)]) == 0
    status, out, _ = _run(capsys, ["hf-lambda2", "--input", str(sim), "--n", "1", "--nprime", "8"])
    assert status == 0 and math.isfinite(json.loads(out)["result"]["lambda2"])
    status, out, _ = _run(capsys, ["estimate", "--input", str(sim), "--lags", "1,2,4,8,16,32"])
    res = json.loads(out)["result"]
    assert status == 0 and res["regime"] in ("low_frequency", "high_frequency", "indeterminate")
    status, out, _ = _run(capsys, ["forecast", "--input", str(sim), "--window", "64"])
    assert status == 0 and out.splitlines()[1] == "origin,target_end,prediction,level"
    assert len(out.splitlines()) == 2 + 1200 - 63
    summ = tmp_path / "s.csv"
    status, out, _ = _run(capsys, ["var-backtest", "--input", str(sim), "--window", "64",
                                   "--p", "0.05", "--summary-csv", str(summ)])
    assert status == 0 and len(json.loads(out)["reports"]) == 1
    assert summ.read_text().splitlines()[0].startswith("p,n_obs,violations")

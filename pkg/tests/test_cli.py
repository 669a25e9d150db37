import json

import numpy as np
import pytest
import yaml

from thermopath import cli
from thermopath.errors import ConfigurationError
from thermopath.oracle_gaussian import GaussianPair, conjugate_normal_log_marginal, exact_divergences

Y = np.random.default_rng(7).normal(1.0, 1.0, 20).round(6).tolist()
TOY = {"family": "normal_mean", "y": Y, "noise_var": 1.0, "prior_mean": 0.0, "prior_var": 1.0}
SMALL = {"iterations": 3000, "burn_in": 600, "pilot_iterations": 50}


def _write(tmp_path, doc, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def _run(tmp_path, command, doc, *extra, out="out"):
    cfg = _write(tmp_path, doc)
    code = cli.main([command, "--config", cfg, "--output-dir", str(tmp_path / out), *extra])
    return code


def _result(tmp_path, out="out"):
    lines = (tmp_path / out / "results.jsonl").read_text().splitlines()
    return json.loads(lines[-1])


class TestConfig:
    def test_pine_scheme_is_echoed(self, tmp_path):
        cfg = cli.parse_config(_write(tmp_path, {"model": {"family": "regression", "prior": {"scheme": "Pi1"}}}))
        prior = cfg["model"]["prior"]
        assert prior["mean"] == [3000.0, 185.0]
        assert prior["var"] == [1e6, 1e4]
        assert (prior["shape"], prior["rate"]) == (3.0, 1.8e5)
        assert cfg["model"]["data"] == "pine"

    def test_defaults_materialized(self, tmp_path):
        cfg = cli.parse_config(_write(tmp_path, {"model": TOY}))
        assert cfg["batch"]["n_batches"] == 30
        assert cfg["tstar"]["tol"] == 1e-3
        assert cfg["chain"]["warm_start"] is True
        assert cfg["method"] == "both"
        assert cfg["schedule"] == {"kind": "uniform", "n": 100, "c": None, "a": None, "points": None}

    @pytest.mark.parametrize(
        "doc, match",
        [
            ({"model": TOY, "shedule": {}}, "shedule"),
            ({"model": TOY, "chain": {"iteration": 10}}, "chain.iteration"),
            ({"model": {**TOY, "noise": 1.0}}, "model.noise"),
            ({"pair": {"mu0": 0, "mu1": 1, "sd": 2}}, "pair.sd"),
            ({"model": {"family": "regression", "prior": {"scheme": "pi1", "alpha": 1}}}, "model.prior.alpha"),
        ],
    )
    def test_unknown_keys_rejected(self, tmp_path, doc, match):
        with pytest.raises(ConfigurationError, match=match):
            cli.parse_config(_write(tmp_path, doc))

    def test_powered_fraction_below_one_rejected(self, tmp_path):
        doc = {"model": TOY, "schedule": {"kind": "powered_fraction", "n": 10, "c": 0.5}}
        with pytest.raises(ConfigurationError, match="^schedule:"):
            cli.parse_config(_write(tmp_path, doc))

    @pytest.mark.parametrize(
        "doc",
        [
            {"model": TOY, "method": "simpson"},
            {"model": TOY, "chain": {"iterations": 10, "burn_in": 20}},
            {"model": TOY, "batch": {"n_batches": 1}},
            {"model": TOY, "tstar": {"tol": 0}},
            {"model": {**TOY, "prior_var": -1.0}},
            {"model": {**TOY, "data": "missing.csv"}},
            {"model": {"family": "regression", "prior": {"scheme": "pi9"}}},
            {"model": {"family": "regression", "prior": {"scheme": "pi1"}, "data": "nope.csv"}},
        ],
    )
    def test_constraint_violations(self, tmp_path, doc):
        with pytest.raises(ConfigurationError):
            cli.parse_config(_write(tmp_path, doc))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="does not exist"):
            cli.read_config(tmp_path / "absent.yaml")

    def test_json_config_accepted(self, tmp_path):
        p = tmp_path / "run.json"
        p.write_text(json.dumps({"model": TOY}))
        assert cli.parse_config(p)["model"]["noise_var"] == 1.0

    def test_hash_ignores_worker_count(self, tmp_path):
        cfg = cli.parse_config(_write(tmp_path, {"model": TOY}))
        other = dict(cfg, workers=4, dump_chains=True)
        assert cli.inputs_hash(cfg) == cli.inputs_hash(other)
        assert cli.inputs_hash(cfg) != cli.inputs_hash(dict(cfg, method="ti"))


class TestRuns:
    def test_marginal_ip_both_matches_closed_form(self, tmp_path, capsys):
        doc = {"model": TOY, "schedule": {"kind": "uniform", "n": 10}, "chain": {"iterations": 12000, "burn_in": 2000}}
        assert _run(tmp_path, "marginal", doc, "--path", "ip", "--method", "both") == 0
        res = _result(tmp_path)["result"]
        exact = conjugate_normal_log_marginal(Y, 1.0, 0.0, 1.0)
        ti, ss = res["estimates"]["ti"], res["estimates"]["ss"]
        assert abs(ti["value"] - ss["value"]) <= 3 * np.hypot(ti["standard_error"], ss["standard_error"])
        for e in (ti, ss):
            assert abs(e["value"] - exact) <= 3 * e["standard_error"]
        assert res["importance"]["family"] == "normal"
        out = capsys.readouterr().out
        assert "[TI]" in out and "[SS]" in out

    def test_artifacts_and_curve_columns(self, tmp_path):
        doc = {"model": TOY, "schedule": {"kind": "uniform", "n": 4}, "chain": SMALL}
        assert _run(tmp_path, "marginal", doc, "--dump-chains") == 0
        doc_out = _result(tmp_path)
        run_dir = next((tmp_path / "out").glob("marginal-*"))
        assert set(doc_out["artifacts"]) >= {"config.json", "curve.csv", "ss_steps.csv", "chains/chain_t0.000000.csv"}
        assert (run_dir / "curve.csv").read_text().splitlines()[0] == "t,e_hat,v_hat,kl_t_hat,nti_partial"
        assert (run_dir / "ss_steps.csv").read_text().splitlines()[0] == "t_lo,t_hi,log_ratio,ess"
        chain = (run_dir / "chains" / "chain_t1.000000.csv").read_text().splitlines()
        assert chain[0] == "iter,theta_1,u"
        assert len(chain) == 1 + SMALL["iterations"] - SMALL["burn_in"]
        echoed = json.loads((run_dir / "config.json").read_text())
        assert echoed == doc_out["config"]

    def test_rerun_is_identical_and_append_only(self, tmp_path):
        doc = {"model": TOY, "schedule": {"kind": "uniform", "n": 4}, "chain": SMALL, "method": "ti"}
        assert _run(tmp_path, "marginal", doc) == 0
        assert _run(tmp_path, "marginal", doc, "--parallel", "2") == 0
        lines = (tmp_path / "out" / "results.jsonl").read_text().splitlines()
        assert len(lines) == 2
        a, b = (json.loads(x) for x in lines)
        for d in (a, b):
            d.pop("timestamp")
            d["config"].pop("workers")
        assert a == b
        dirs = sorted(p.name for p in (tmp_path / "out").iterdir() if p.is_dir())
        assert len(dirs) == 2 and dirs[0].endswith("-001") and dirs[1].endswith("-002")
        ra, rb = (tmp_path / "out" / d / "result.json" for d in dirs)
        strip = lambda p: {k: v for k, v in json.loads(p.read_text()).items() if k not in ("timestamp", "config")}
        assert strip(ra) == strip(rb)

    def test_seed_override_changes_hash(self, tmp_path):
        doc = {"model": TOY, "schedule": {"kind": "uniform", "n": 2}, "chain": SMALL, "method": "ti"}
        assert _run(tmp_path, "marginal", doc, "--seed", "5") == 0
        first = _result(tmp_path)
        assert first["seed"] == 5
        assert _run(tmp_path, "marginal", doc, "--seed", "6") == 0
        assert _result(tmp_path)["inputs_hash"] != first["inputs_hash"]

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "from_env"))
        doc = {"pair": {"mu0": 0.0, "mu1": 1.0}}
        assert cli.main(["oracle", "--config", _write(tmp_path, doc)]) == 0
        assert (tmp_path / "from_env" / "results.jsonl").is_file()

    def test_oracle(self, tmp_path):
        doc = {"pair": {"mu0": 0.0, "mu1": 1.0}, "model": TOY}
        assert _run(tmp_path, "oracle", doc) == 0
        res = _result(tmp_path)["result"]
        assert res["gaussian_pair"]["hellinger"] == pytest.approx(exact_divergences(GaussianPair(0, 1))["hellinger"])
        assert res["log_marginal_likelihood"] == pytest.approx(conjugate_normal_log_marginal(Y, 1.0, 0.0, 1.0))

    def test_oracle_pine(self, tmp_path):
        doc = {"model": {"family": "regression", "prior": {"scheme": "pi1"}}}
        assert _run(tmp_path, "oracle", doc) == 0
        assert _result(tmp_path)["result"]["log_marginal_likelihood"] == pytest.approx(-309.924, abs=1e-3)

    def test_divergences_on_gaussian_pair(self, tmp_path):
        doc = {"pair": {"mu0": 0.0, "mu1": 1.0}, "schedule": {"kind": "uniform", "n": 20},
               "chain": {"iterations": 14000, "burn_in": 2000}}
        assert _run(tmp_path, "divergences", doc) == 0
        res = _result(tmp_path)["result"]
        oracle = exact_divergences(GaussianPair(0.0, 1.0))
        tol = {"kl_1_0": 0.03, "kl_0_1": 0.03, "j": 0.05, "chernoff_info": 0.01, "bhattacharyya": 0.01,
               "hellinger": 0.02}
        for name, t in tol.items():
            assert abs(res["divergences"][name]["value"] - oracle[name]) <= t, name
        assert abs(res["t_star"] - 0.5) <= 0.02

    def test_divergences_without_midpoint_in_schedule(self, tmp_path):
        doc = {"pair": {"mu0": 0.0, "mu1": 1.0}, "schedule": {"kind": "powered_fraction", "n": 9, "c": 2},
               "chain": SMALL, "tstar": {"tol": 0.01}}
        assert _run(tmp_path, "divergences", doc) == 0
        res = _result(tmp_path)["result"]
        assert abs(res["divergences"]["bhattacharyya"]["value"] - 0.125) <= 0.05

    def test_chernoff_and_diagnose(self, tmp_path):
        doc = {"pair": {"mu0": 0.0, "mu1": 1.0}, "schedule": {"kind": "uniform", "n": 10}, "chain": SMALL,
               "tstar": {"tol": 0.01}}
        assert _run(tmp_path, "chernoff", doc) == 0
        res = _result(tmp_path)["result"]
        assert res["bracket"][1] - res["bracket"][0] <= 0.01
        assert set(res["chernoff_info"]) == {"value", "mce"}
        assert _run(tmp_path, "diagnose", doc) == 0
        res = _result(tmp_path)
        assert "verdict" in res["result"]
        run_dir = tmp_path / "out" / next(p for p in (tmp_path / "out").iterdir() if p.name.startswith("diagnose"))
        header = (run_dir / "geometry.csv").read_text().splitlines()[0]
        assert header == "t_lo,t_hi,slope,j_proxy,v_hat_lo,v_hat_hi"

    @pytest.mark.parametrize("route", ["ms", "qpp", "qip", "separate"])
    def test_bayes_factor_routes(self, tmp_path, route):
        doc = {"model": TOY, "model0": {**TOY, "prior_var": 25.0}, "schedule": {"kind": "uniform", "n": 10},
               "chain": {"iterations": 6000, "burn_in": 1000}, "route": route}
        assert _run(tmp_path, "bayes-factor", doc) == 0
        res = _result(tmp_path)["result"]
        exact = conjugate_normal_log_marginal(Y, 1.0, 0.0, 1.0) - conjugate_normal_log_marginal(Y, 1.0, 0.0, 25.0)
        # coarse schedule; separate PP runs carry the largest trapezoid bias
        assert abs(res["estimates"]["ss"]["value"] - exact) < 0.15
        assert res["route"] == route


class TestErrors:
    def test_config_error_exit_2(self, tmp_path, capsys):
        assert _run(tmp_path, "marginal", {"model": TOY, "bogus": 1}) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["exit_code"] == 2 and "bogus" in err["message"]
        assert (tmp_path / "out" / "error.json").is_file()

    def test_missing_section_exit_2(self, tmp_path, capsys):
        assert _run(tmp_path, "marginal", {"pair": {"mu0": 0, "mu1": 1}}) == 2
        assert "needs a 'model' section" in capsys.readouterr().err

    def test_support_error_exit_3(self, tmp_path, capsys):
        doc = {"model": {**TOY, "y": [1e200, 1.0]}, "schedule": {"kind": "uniform", "n": 4}, "chain": SMALL}
        with pytest.warns(RuntimeWarning):
            assert _run(tmp_path, "marginal", doc) == 3
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["module"] == "sampler"
        assert err["t"] == 0.0 and isinstance(err["seed"], int)
        assert err["cause"]["error"] == "SupportError"
        run_dir = next((tmp_path / "out").glob("marginal-*"))
        assert json.loads((run_dir / "error.json").read_text()) == err

    def test_degenerate_pair_exit_4(self, tmp_path, capsys):
        doc = {"pair": {"mu0": 0.0, "mu1": 0.0}, "schedule": {"kind": "uniform", "n": 4}, "chain": SMALL}
        assert _run(tmp_path, "chernoff", doc) == 4
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "DegeneratePathError" and err["module"] == "estimators_ti"

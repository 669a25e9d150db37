"""Command-line front end.

Every subcommand reads a YAML (or JSON) config, fills in defaults, runs one
pipeline and writes its artifacts into a fresh run directory under the
output directory.  A one-line JSON document per run is appended to
``results.jsonl`` there.

Exit codes: 0 success, 2 configuration error, 3 numeric or support error,
4 degenerate path.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as dt
import hashlib
import json
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .batching import BatchSpec
from .diagnostics import diagnose
from .errors import ConfigurationError, ThermopathError
from .estimators_ss import stepping_stone
from .estimators_ti import divergence_report, e_hat_curve, estimate_t_star, kl_t_curve, nti_partial_sums, ti_trapezoid
from .model_eval import (
    bayes_factor_ms,
    bayes_factor_quadrivial,
    bayes_factor_separate,
    build_importance,
    ip_path,
    marginal_ip,
    marginal_pp,
    normal_mean_model,
    pp_path,
)
from .oracle_gaussian import GaussianPair, conjugate_normal_log_marginal, exact_divergences
from .regression import PINE_PRIORS, RegressionModel, load_csv, load_pine, regression_log_marginal
from .sampler import ChainConfig, extend_ladder, run_ladder
from .schedules import from_spec, uniform_schedule

OUTPUT_ENV = "THERMOPATH_OUTPUT_DIR"
DEFAULT_OUTPUT = "thermopath_runs"

# Every accepted key with its default; None marks "no default".
DEFAULTS = {
    "model": None,
    "model0": None,
    "pair": None,
    "path": "pp",
    "method": "both",
    "route": "ms",
    "schedule": {"kind": "uniform", "n": 100, "c": None, "a": None, "points": None},
    "chain": {
        "iterations": 25000,
        "burn_in": 5000,
        "thin": 1,
        "seed": 0,
        "adapt": True,
        "step_scale": None,
        "log_scale": [],
        "pilot_iterations": 300,
        "warm_start": True,
    },
    "batch": {"n_batches": 30, "batch_size": None},
    "tstar": {"tol": 1e-3, "max_extra_runs": 60},
    "divergences": {"log_lambda": "ti", "tsallis": "positive"},
    "importance": {"iterations": None},
    "dump_chains": False,
    "workers": 1,
}
MODEL_KEYS = {
    "regression": {"family", "data", "prior", "label"},
    "normal_mean": {"family", "data", "y", "noise_var", "prior_mean", "prior_var", "label"},
}
PRIOR_KEYS = {"scheme", "mean", "var", "shape", "rate"}
PAIR_KEYS = {"mu0", "mu1", "sigma0", "sigma1", "c0", "c1"}
CHOICES = {
    "path": ("pp", "ip"),
    "method": ("ti", "ss", "both"),
    "route": ("ms", "qpp", "qip", "separate"),
    "divergences.log_lambda": ("ti", "ss"),
    "divergences.tsallis": ("positive", "literal"),
}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _merge(defaults, given, prefix=""):
    if not isinstance(given, dict):
        raise ConfigurationError(f"{prefix or 'config'}: expected a mapping, got {type(given).__name__}")
    out = {}
    for key in given:
        if key not in defaults:
            raise ConfigurationError(f"unknown config key {prefix + key!r}")
    for key, default in defaults.items():
        value = given.get(key, copy.deepcopy(default))
        if isinstance(default, dict):
            value = _merge(default, {} if value is None else value, f"{prefix}{key}.")
        out[key] = value
    return out


def _check_model(model, key):
    if model is None:
        return
    if not isinstance(model, dict):
        raise ConfigurationError(f"{key}: expected a mapping")
    family = model.get("family")
    if family not in MODEL_KEYS:
        raise ConfigurationError(f"{key}.family must be one of {sorted(MODEL_KEYS)}, got {family!r}")
    for k in model:
        if k not in MODEL_KEYS[family]:
            raise ConfigurationError(f"unknown config key '{key}.{k}' for family {family}")
    if family == "regression":
        prior = model.get("prior")
        if not isinstance(prior, dict):
            raise ConfigurationError(f"{key}.prior: expected a mapping with 'scheme' or explicit hyperparameters")
        for k in prior:
            if k not in PRIOR_KEYS:
                raise ConfigurationError(f"unknown config key '{key}.prior.{k}'")
        if "scheme" in prior:
            scheme = str(prior["scheme"]).lower()
            if scheme not in PINE_PRIORS:
                raise ConfigurationError(f"{key}.prior.scheme must be one of {sorted(PINE_PRIORS)}")
            s = PINE_PRIORS[scheme]
            # echo the hyperparameters the scheme stands for
            prior.update(scheme=scheme, mean=list(map(float, s.mean)), var=list(map(float, s.var)),
                         shape=float(s.shape), rate=float(s.rate))
        missing = {"mean", "var", "shape", "rate"} - set(prior)
        if missing:
            raise ConfigurationError(f"{key}.prior is missing {sorted(missing)}")
        model.setdefault("data", "pine")
    else:
        for k in ("noise_var", "prior_mean", "prior_var"):
            if k not in model:
                raise ConfigurationError(f"{key}.{k} is required for family normal_mean")
        if ("y" in model) == ("data" in model):
            raise ConfigurationError(f"{key}: give exactly one of 'y' (inline values) or 'data' (CSV path)")
        if model.get("noise_var", 1) <= 0 or model.get("prior_var", 1) <= 0:
            raise ConfigurationError(f"{key}: variances must be positive")
    if "data" in model and model["data"] != "pine" and not Path(model["data"]).is_file():
        raise ConfigurationError(f"{key}.data: file {model['data']!r} does not exist")


def _check_pair(pair):
    if pair is None:
        return
    if not isinstance(pair, dict):
        raise ConfigurationError("pair: expected a mapping")
    for k in pair:
        if k not in PAIR_KEYS:
            raise ConfigurationError(f"unknown config key 'pair.{k}'")
    for k in ("mu0", "mu1"):
        if k not in pair:
            raise ConfigurationError(f"pair.{k} is required")
    pair.setdefault("sigma0", 1.0)
    pair.setdefault("sigma1", 1.0)
    pair.setdefault("c0", 1.0)
    pair.setdefault("c1", 1.0)


def validate_config(raw: dict) -> dict:
    """Merge ``raw`` over the defaults and check every constraint.

    Returns the fully materialized config; raises ConfigurationError naming
    the offending key.
    """
    cfg = _merge(DEFAULTS, copy.deepcopy(raw or {}))
    for key, options in CHOICES.items():
        section, _, leaf = key.partition(".")
        value = cfg[section][leaf] if leaf else cfg[section]
        if value not in options:
            raise ConfigurationError(f"{key} must be one of {options}, got {value!r}")
    _check_model(cfg["model"], "model")
    _check_model(cfg["model0"], "model0")
    _check_pair(cfg["pair"])
    for section, build in (("schedule", build_schedule), ("chain", chain_config), ("batch", batch_spec)):
        try:
            build(cfg)
        except (ThermopathError, TypeError) as exc:
            raise ConfigurationError(f"{section}: {exc}") from exc
    if cfg["tstar"]["tol"] <= 0:
        raise ConfigurationError("tstar.tol must be positive")
    if int(cfg["workers"]) < 1:
        raise ConfigurationError("workers must be at least 1")
    return cfg


def read_config(path) -> dict:
    """Raw document from a YAML file; YAML is a superset of JSON so both are accepted."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {str(path)!r} does not exist")
    try:
        return yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file does not parse: {exc}") from exc


def parse_config(path) -> dict:
    """Read and validate a config file."""
    return validate_config(read_config(path))


def build_schedule(cfg):
    s = cfg["schedule"]
    return from_spec(s["kind"], s["n"], s["c"], s["a"], s["points"])


def chain_config(cfg) -> ChainConfig:
    c = dict(cfg["chain"])
    c["log_scale"] = tuple(c["log_scale"] or ())
    c["step_scale"] = None if c["step_scale"] is None else tuple(np.atleast_1d(c["step_scale"]).tolist())
    return ChainConfig(**c)


def batch_spec(cfg) -> BatchSpec:
    return BatchSpec(**cfg["batch"])


def build_model(spec: dict):
    label = spec.get("label")
    if spec["family"] == "regression":
        data = load_pine() if spec["data"] == "pine" else load_csv(spec["data"])
        p = spec["prior"]
        return RegressionModel(data, p["mean"], p["var"], p["shape"], p["rate"], label or p.get("scheme", "regression"))
    y = _model_y(spec)
    return normal_mean_model(y, spec["noise_var"], spec["prior_mean"], spec["prior_var"], label or "normal_mean")


def _model_y(spec) -> np.ndarray:
    if "y" in spec:
        return np.asarray(spec["y"], dtype=float)
    with open(spec["data"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "y" not in rows[0]:
        raise ConfigurationError(f"{spec['data']}: expected a CSV with a 'y' column")
    return np.array([float(r["y"]) for r in rows])


def build_pair(spec: dict) -> GaussianPair:
    return GaussianPair(spec["mu0"], spec["mu1"], spec["sigma0"], spec["sigma1"], spec["c0"], spec["c1"])


def inputs_hash(cfg: dict) -> str:
    """SHA-256 over the canonical config and the bytes of every referenced data file."""
    # settings that cannot change any number are left out
    core = {k: v for k, v in cfg.items() if k not in ("workers", "dump_chains")}
    h = hashlib.sha256(json.dumps(core, sort_keys=True, default=str).encode())
    for key in ("model", "model0"):
        spec = cfg.get(key)
        if spec and spec.get("data") not in (None, "pine"):
            h.update(Path(spec["data"]).read_bytes())
    return h.hexdigest()


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------


class RunDir:
    """A fresh directory per run; never reuses an existing one."""

    def __init__(self, root: Path, command: str, digest: str):
        root.mkdir(parents=True, exist_ok=True)
        k = 1
        while (root / f"{command}-{digest[:10]}-{k:03d}").exists():
            k += 1
        self.path = root / f"{command}-{digest[:10]}-{k:03d}"
        self.path.mkdir()
        self.files = []

    def write_csv(self, name, header, rows):
        with open(self.path / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        self.files.append(name)

    def write_json(self, name, doc):
        (self.path / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        self.files.append(name)


def _fmt(x):
    return repr(float(x))


def write_curve(run: RunDir, ladder, name="curve.csv", log_lambda=None):
    curve = e_hat_curve(ladder)
    ll = ti_trapezoid(curve) if log_lambda is None else log_lambda
    kl = kl_t_curve(curve, ll)
    partial = nti_partial_sums(kl)
    rows = [
        [_fmt(t), _fmt(e), _fmt(v), _fmt(k), _fmt(p)]
        for t, e, v, k, p in zip(curve.t, curve.e_hat, curve.v_hat, kl.kl_t_hat, partial)
    ]
    run.write_csv(name, ["t", "e_hat", "v_hat", "kl_t_hat", "nti_partial"], rows)


def write_ss_steps(run: RunDir, ladder, name="ss_steps.csv"):
    ss = stepping_stone(ladder)
    rows = [[_fmt(r["t_lo"]), _fmt(r["t_hi"]), _fmt(r["log_ratio"]), _fmt(r["ess"])] for r in ss.steps()]
    run.write_csv(name, ["t_lo", "t_hi", "log_ratio", "ess"], rows)


def dump_chains(run: RunDir, ladder):
    sub = run.path / "chains"
    sub.mkdir(exist_ok=True)
    for chain in ladder.chains:
        d = chain.samples.shape[1]
        name = f"chains/chain_t{chain.t:.6f}.csv"
        rows = [
            [i, *map(_fmt, th), _fmt(u)] for i, (th, u) in enumerate(zip(chain.samples, chain.u_values))
        ]
        run.write_csv(name, ["iter", *[f"theta_{j + 1}" for j in range(d)], "u"], rows)


def _est(e):
    return {"value": float(e.value), "mce": float(e.mce), "standard_error": float(e.standard_error)}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _importance_for(model, cfg, workers):
    """Moment-matched g from a dedicated chain at t = 1 (its own seed stream)."""
    ccfg = chain_config(cfg)
    if cfg["importance"]["iterations"]:
        it = int(cfg["importance"]["iterations"])
        ccfg = replace(ccfg, iterations=it, burn_in=min(ccfg.burn_in, it // 2))
    ccfg = replace(ccfg, seed=(ccfg.seed + 1) % 2**64)
    if not ccfg.log_scale and model.positive_coordinates():
        ccfg = replace(ccfg, log_scale=tuple(model.positive_coordinates()))
    lad = run_ladder(pp_path(model), uniform_schedule(1), ccfg, init=model.default_init(), workers=workers)
    return build_importance(lad.chain_at(1.0), model)


def _need(cfg, key, command):
    if cfg[key] is None:
        raise ConfigurationError(f"'{command}' needs a '{key}' section")
    return cfg[key]


def cmd_marginal(cfg, run, workers):
    model = build_model(_need(cfg, "model", "marginal"))
    sched, ccfg, spec = build_schedule(cfg), chain_config(cfg), batch_spec(cfg)
    if cfg["path"] == "pp":
        res = marginal_pp(model, sched, ccfg, cfg["method"], spec, workers)
        extra = {}
    else:
        g = _importance_for(model, cfg, workers)
        res = marginal_ip(model, g, sched, ccfg, cfg["method"], spec, workers)
        extra = {"importance": {"family": g.family, "mean": g.mean.tolist(), "var": g.var.tolist()}}
    write_curve(run, res.ladder)
    write_ss_steps(run, res.ladder)
    if cfg["dump_chains"]:
        dump_chains(run, res.ladder)
    return {
        "quantity": "log_marginal_likelihood",
        "route": cfg["path"],
        "estimates": {k: _est(v) for k, v in res.estimates().items()},
        "warnings": res.warnings,
        **extra,
    }


def cmd_bayes_factor(cfg, run, workers):
    m1 = build_model(_need(cfg, "model", "bayes-factor"))
    m0 = build_model(_need(cfg, "model0", "bayes-factor"))
    sched, ccfg, spec = build_schedule(cfg), chain_config(cfg), batch_spec(cfg)
    route, method = cfg["route"], cfg["method"]
    if route == "separate":
        r1 = marginal_pp(m1, sched, ccfg, method, spec, workers)
        r0 = marginal_pp(m0, sched, ccfg, method, spec, workers)
        write_curve(run, r1.ladder, "curve_model.csv")
        write_curve(run, r0.ladder, "curve_model0.csv")
        if cfg["dump_chains"]:
            dump_chains(run, r1.ladder)
        ests = {k: _est(v) for k, v in bayes_factor_separate(r1, r0).items()}
        return {"quantity": "log_bayes_factor_10", "route": route, "estimates": ests, "warnings": []}
    needs_g = route == "qip" or m1.dim != m0.dim
    g1 = _importance_for(m1, cfg, workers) if needs_g else None
    g0 = _importance_for(m0, cfg, workers) if needs_g else None
    if route == "ms":
        res = bayes_factor_ms(m1, m0, sched, ccfg, method, importance=(g1, g0) if needs_g else None,
                              spec=spec, workers=workers)
    else:
        res = bayes_factor_quadrivial(m1, m0, sched, ccfg, method, nested=route[1:], g1=g1, g0=g0,
                                      spec=spec, workers=workers)
    write_curve(run, res.ladder)
    write_ss_steps(run, res.ladder)
    if cfg["dump_chains"]:
        dump_chains(run, res.ladder)
    return {
        "quantity": "log_bayes_factor_10",
        "route": route,
        "estimates": {k: _est(v) for k, v in res.estimates().items()},
        "warnings": res.warnings,
    }


def _divergence_path(cfg, workers):
    if cfg["pair"] is not None:
        return build_pair(cfg["pair"]).path(), None
    model = build_model(_need(cfg, "model", "divergences"))
    if cfg["path"] == "pp":
        return pp_path(model), model
    return ip_path(model, _importance_for(model, cfg, workers)), model


def _init_for(model):
    return None if model is None else model.default_init()


def cmd_chernoff(cfg, run, workers, report=False):
    path, model = _divergence_path(cfg, workers)
    sched, ccfg = build_schedule(cfg), chain_config(cfg)
    ladder = run_ladder(path, sched, ccfg, init=_init_for(model), workers=workers)
    # the report needs t = 0.5 (Bhattacharyya); add it when the schedule lacks it
    ladder = extend_ladder(ladder, [0.5], ccfg, workers)
    ts = estimate_t_star(path, sched, ccfg, tol=cfg["tstar"]["tol"], ladder=ladder, workers=workers,
                         max_extra_runs=cfg["tstar"]["max_extra_runs"])
    out = {
        "quantity": "chernoff",
        "t_star": ts.t_star,
        "bracket": [ts.lo, ts.hi],
        "extra_runs": ts.extra_runs,
        "sign_risk": ts.sign_risk,
        "log_lambda_hat": ts.log_lambda_hat,
        "warnings": list(ts.warnings),
    }
    rep = divergence_report(ts.ladder, cfg["divergences"]["log_lambda"], ts.t_star, batch_spec(cfg),
                            cfg["divergences"]["tsallis"])
    d = rep.to_dict()
    if report:
        out["quantity"] = "divergences"
        out["divergences"] = {k: v for k, v in d.items() if k != "t_star"}
    else:
        out["chernoff_info"] = d["chernoff_info"]
        out["renyi_at_t_star"] = d["renyi_at_t_star"]
        out["tsallis_at_t_star"] = d["tsallis_at_t_star"]
    write_curve(run, ts.ladder, log_lambda=ts.log_lambda_hat)
    if cfg["dump_chains"]:
        dump_chains(run, ts.ladder)
    return out


def cmd_divergences(cfg, run, workers):
    return cmd_chernoff(cfg, run, workers, report=True)


def cmd_diagnose(cfg, run, workers):
    path, model = _divergence_path(cfg, workers)
    ladder = run_ladder(path, build_schedule(cfg), chain_config(cfg), init=_init_for(model), workers=workers)
    diag = diagnose(ladder, batch_spec(cfg))
    rows = [[_fmt(r[k]) for k in ("t_lo", "t_hi", "slope", "j_proxy", "v_hat_lo", "v_hat_hi")]
            for r in diag.geometry.rows()]
    run.write_csv("geometry.csv", ["t_lo", "t_hi", "slope", "j_proxy", "v_hat_lo", "v_hat_hi"], rows)
    write_curve(run, ladder)
    write_ss_steps(run, ladder)
    if cfg["dump_chains"]:
        dump_chains(run, ladder)
    return {
        "quantity": "diagnosis",
        "nti_residual": _est(diag.residual),
        "flagged": diag.flagged,
        "verdict": diag.verdict,
    }


def cmd_oracle(cfg, run, workers):
    out = {"quantity": "oracle"}
    if cfg["pair"] is not None:
        out["gaussian_pair"] = exact_divergences(build_pair(cfg["pair"]))
    if cfg["model"] is not None:
        model = build_model(cfg["model"])
        if isinstance(model, RegressionModel):
            out["log_marginal_likelihood"] = regression_log_marginal(model)
        else:
            spec = cfg["model"]
            y = _model_y(spec)
            out["log_marginal_likelihood"] = conjugate_normal_log_marginal(
                y, spec["noise_var"], spec["prior_mean"], spec["prior_var"]
            )
    if len(out) == 1:
        raise ConfigurationError("'oracle' needs a 'pair' or a 'model' section")
    return json.loads(json.dumps(out, default=float))


HANDLERS = {
    "marginal": cmd_marginal,
    "bayes-factor": cmd_bayes_factor,
    "divergences": cmd_divergences,
    "chernoff": cmd_chernoff,
    "diagnose": cmd_diagnose,
    "oracle": cmd_oracle,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML or JSON run config")
    common.add_argument("--iterations", type=int)
    common.add_argument("--burn-in", type=int)
    common.add_argument("--thin", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--parallel", type=int, help="worker threads for ladder runs")
    common.add_argument("--dump-chains", action="store_true", default=None)
    common.add_argument("--output-dir", help=f"defaults to ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT}")
    parser = argparse.ArgumentParser(prog="thermopath", description="Tempered-path estimation of normalizing-constant ratios and divergences.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("marginal", parents=[common], help="log marginal likelihood")
    p.add_argument("--path", choices=CHOICES["path"])
    p.add_argument("--method", choices=CHOICES["method"])
    p = sub.add_parser("bayes-factor", parents=[common], help="log Bayes factor of model over model0")
    p.add_argument("--route", choices=CHOICES["route"])
    p.add_argument("--method", choices=CHOICES["method"])
    p = sub.add_parser("divergences", parents=[common], help="KL, J, Bhattacharyya, Hellinger, Chernoff")
    p.add_argument("--path", choices=CHOICES["path"])
    p = sub.add_parser("chernoff", parents=[common], help="t* and Chernoff information")
    p.add_argument("--path", choices=CHOICES["path"])
    p = sub.add_parser("diagnose", parents=[common], help="NTI residual and secant geometry")
    p.add_argument("--path", choices=CHOICES["path"])
    sub.add_parser("oracle", parents=[common], help="exact reference values")
    return parser


def _apply_overrides(raw: dict, args) -> dict:
    raw = copy.deepcopy(raw or {})
    if not isinstance(raw, dict):
        raise ConfigurationError("config: expected a mapping at the top level")
    chain = raw.setdefault("chain", {})
    if not isinstance(chain, dict):
        raise ConfigurationError("chain: expected a mapping")
    for flag, key in (("iterations", "iterations"), ("burn_in", "burn_in"), ("thin", "thin"), ("seed", "seed")):
        value = getattr(args, flag)
        if value is not None:
            chain[key] = value
    for flag in ("path", "method", "route"):
        value = getattr(args, flag, None)
        if value is not None:
            raw[flag] = value
    if args.parallel is not None:
        raw["workers"] = args.parallel
    if args.dump_chains:
        raw["dump_chains"] = True
    return raw


def _error_doc(exc: BaseException) -> dict:
    module = None
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        if f"{os.sep}thermopath{os.sep}" in frame.filename:
            module = Path(frame.filename).stem
            break
    doc = {
        "error": type(exc).__name__,
        "message": str(exc),
        "module": module,
        "exit_code": int(getattr(exc, "exit_code", 3)),
    }
    for attr in ("t", "seed", "which"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    cause = getattr(exc, "cause", None)
    if cause is not None:
        doc["cause"] = {"error": type(cause).__name__, "message": str(cause)}
    return doc


def _summary(doc: dict) -> str:
    lines = [f"{doc['command']}  seed={doc['seed']}  inputs={doc['inputs_hash'][:12]}"]
    res = doc["result"]
    for k, v in res.get("estimates", {}).items():
        lines.append(f"  {res['quantity']} [{k.upper()}]  {v['value']:.6g}  (MCE {v['mce']:.3g})")
    if "t_star" in res:
        lines.append(f"  t*  {res['t_star']:.6g}  (bracket {res['bracket'][0]:.6g}..{res['bracket'][1]:.6g})")
    for name in ("chernoff_info", "renyi_at_t_star", "tsallis_at_t_star"):
        if name in res:
            lines.append(f"  {name}  {res[name]['value']:.6g}  (MCE {res[name]['mce']:.3g})")
    for name, v in res.get("divergences", {}).items():
        lines.append(f"  {name}  {v['value']:.6g}  (MCE {v['mce']:.3g})")
    if "verdict" in res:
        lines.append(f"  {res['verdict']}")
    if "log_marginal_likelihood" in res and isinstance(res["log_marginal_likelihood"], float):
        lines.append(f"  exact log marginal likelihood  {res['log_marginal_likelihood']:.6g}")
    for name, v in res.get("gaussian_pair", {}).items():
        lines.append(f"  {name}  {v:.6g}")
    for w in res.get("warnings", []):
        lines.append(f"  warning: {w}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    root = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    run = None
    try:
        cfg = validate_config(_apply_overrides(read_config(args.config), args))
        digest = inputs_hash(cfg)
        run = RunDir(root, args.command, digest)
        run.write_json("config.json", cfg)
        result = HANDLERS[args.command](cfg, run, int(cfg["workers"]))
        doc = {
            "command": args.command,
            "inputs_hash": digest,
            "seed": cfg["chain"]["seed"],
            "config": cfg,
            "result": result,
            "artifacts": sorted(run.files),
            "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(),
        }
        run.write_json("result.json", doc)
        with open(root / "results.jsonl", "a") as fh:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
        print(_summary(doc))
        print(f"artifacts in {run.path}")
        return 0
    except ThermopathError as exc:
        doc = _error_doc(exc)
        text = json.dumps(doc, sort_keys=True, default=str)
        target = run.path if run is not None else root
        try:
            target.mkdir(parents=True, exist_ok=True)
            (target / "error.json").write_text(text + "\n")
        except OSError:
            pass
        print(text, file=sys.stderr)
        return doc["exit_code"]


if __name__ == "__main__":
    sys.exit(main())

"""Command-line experiment runner.

Each subcommand reads one INI section of the same name (``[qd]``, ``[sis]``,
...) plus an optional ``[run]`` section holding ``seed``.  Values can be
overridden with ``--set key=value`` or ``--set section.key=value``.  Results
are written as CSV files into ``--out`` with a trailing metadata block.

Exit codes: 0 on success, 2 on a configuration error, 3 on a numeric failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericFailure

# Defaults double as the schema: a key's default fixes its type.
DEFAULTS: dict[str, dict] = {
    "qd": {
        "eps": 0.05, "d": 0.05, "f": 1.0, "obs": "0.8,0.2;0.2,0.8", "rule": "classical",
        "costs": "0,1;3,0", "alpha": 1.0, "grid": 201, "max_iter": 100_000,
    },
    "herding": {
        "obs": "0.8,0.2;0.2,0.8", "costs": "0,1;1,0",
        "alphas": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0], "grid": 1001,
    },
    "cascade": {
        "obs": "0.8,0.2;0.2,0.8", "costs": "0,1;1,0", "prior": 0.5, "alpha": 1.0,
        "trials": 1000, "horizon": 500,
    },
    "pricing": {
        "prices": [0.0, 1.0], "reveal": [0.0, 0.9], "beta": 2.0, "rho": 0.9,
        "obs": "0.8,0.2;0.2,0.8", "costs": "0,1;1,0", "grid": 501, "trials": 10_000, "horizon": 20,
    },
    "sis": {
        "law": "poisson", "law_param": 3.0, "d_max": 6, "beta": 0.3, "delta": 0.3,
        "sizes": [100, 1000, 10_000], "trials": 50, "epochs": 10, "rho0": 0.5, "network": "annealed",
        "filter": "ekf", "filter_n": 1000, "filter_m": 1000, "filter_epochs": 20,
        "pcrlb_horizon": 20, "mc_draws": 200, "var0": 0.01,
    },
    "degdist": {
        "p_dup": 0.5, "q_copy": 0.4, "eps": [0.002, 0.005, 0.01, 0.02, 0.05], "trials": 6, "n0": 10_000,
    },
    "gce": {
        "b_red": 0.2, "m": 2, "h_bb": 0.1, "h_br": 1.0, "h_rb": 1.0, "h_rr": 1.0,
        "delta0": 1.0, "reciprocal": 0.2, "steps": 20_000, "every": 1000, "runs": 1,
    },
    "poll": {
        "fixture": "er", "n": 1000, "mean_degree": 10.0, "p1": 0.3, "k": 50, "trials": 10_000,
        "methods": "intent,expectation,nep-Y,nep-Z",
    },
}
RUN_KEYS = {"seed"}


# ---------------------------------------------------------------------------
# config


def _coerce(default, raw: str, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return {"true": True, "1": True, "false": False, "0": False}[raw.lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            cast = int if all(isinstance(x, int) for x in default) else float
            return [cast(x) for x in raw.split(",") if x.strip()]
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return raw


def load_config(command: str, path: str | None, overrides) -> tuple[dict, int | None]:
    """Resolved parameters for ``command`` and the config-file seed, if any."""
    params = dict(DEFAULTS[command])
    seed = None
    raw: list[tuple[str, str, str]] = []
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in cp.sections():
            if section != "run" and section not in DEFAULTS:
                raise ConfigError(f"unknown section [{section}]")
            raw.extend((section, k, v) for k, v in cp.items(section))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        section, _, key = key.strip().rpartition(".")
        raw.append((section or command, key, value))
    for section, key, value in raw:
        if section == "run":
            if key not in RUN_KEYS:
                raise ConfigError(f"unknown key {key!r} in [run]")
            seed = _coerce(0, value, key)
        elif key not in DEFAULTS[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        elif section == command:
            params[key] = _coerce(DEFAULTS[section][key], value, key)
    return params, seed


def config_hash(command: str, params: dict) -> str:
    blob = json.dumps({"command": command, "params": params}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _matrix(text: str) -> np.ndarray:
    try:
        return np.array([[float(x) for x in row.split(",")] for row in text.split(";")])
    except ValueError as exc:
        raise ConfigError(f"bad matrix {text!r}; use rows separated by ';'") from exc


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def render_csv(header, rows, seed: int, digest: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    buf.write(f"# seed: {seed}\n# config hash: {digest}\n")
    return buf.getvalue()


def _subseeds(seed: int, n: int) -> list[int]:
    return [int(x) for x in np.random.SeedSequence(seed).generate_state(n)]


def _pool_map(fn, items, jobs: int):
    """Ordered map, in a process pool when ``jobs > 1``."""
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# studies; each returns {file name: (header, rows)}


def _social_model(p):
    from .social_learning import SocialLearningModel

    obs = _matrix(p["obs"])
    return SocialLearningModel(np.eye(obs.shape[0]), obs, _matrix(p["costs"]))


def study_qd(p, seed, jobs):
    from .quickest import BeliefUpdateRule, ChangeModel, solve_cvar_stopping, solve_stopping

    cm = ChangeModel(p["eps"], _matrix(p["obs"]), p["d"], p["f"])
    costs = None if p["rule"] == "classical" else _matrix(p["costs"])
    rule = BeliefUpdateRule(p["rule"], costs, p["alpha"] if p["rule"] == "cvar-social" else 1.0)
    if p["rule"] == "cvar-social":
        sol = solve_cvar_stopping(cm, rule, p["alpha"], p["grid"], max_iter=p["max_iter"])
    else:
        sol = solve_stopping(cm, rule, p["grid"], max_iter=p["max_iter"])
    rows = [(g, v, "stop" if s else "continue") for g, v, s in zip(sol.grid, sol.value, sol.policy)]
    return {"qd.csv": (["pi1", "value", "policy"], rows)}


def _intervals(points, step):
    out = []
    for x in points:
        if out and x - out[-1][1] <= step * 1.5:
            out[-1][1] = x
            out[-1][2] += 1
        else:
            out.append([x, x, 1])
    return out


def study_herding(p, seed, jobs):
    from .social_learning import herding_region

    m = _social_model(p)
    rows = []
    step = 1.0 / (p["grid"] - 1)
    for a in sorted(p["alphas"]):
        region = herding_region(m, a, grid=p["grid"])
        for lo, hi, count in _intervals(region, step):
            rows.append((a, lo, hi, count))
    return {"herding.csv": (["alpha", "start", "end", "points"], rows)}


def _cascade_one(args):
    m, prior, horizon, alpha, ss = args
    from .social_learning import detect_cascade

    return detect_cascade(m, prior, horizon, ss, alpha)


def study_cascade(p, seed, jobs):
    m = _social_model(p)
    prior = [p["prior"], 1.0 - p["prior"]]
    children = np.random.SeedSequence(seed).spawn(p["trials"])
    times = _pool_map(_cascade_one, [(m, prior, p["horizon"], p["alpha"], c) for c in children], jobs)
    return {"cascade.csv": (["trial", "cascade_time"], list(enumerate(times)))}


def study_pricing(p, seed, jobs):
    from .quickest import PricingModel, solve_pricing, verify_supermartingale

    pm = PricingModel(p["prices"], p["reveal"], beta=p["beta"], rho=p["rho"])
    m = _social_model(p)
    sol = solve_pricing(pm, m, p["grid"])
    frac, mean_price = verify_supermartingale(sol, pm, m, p["trials"], seed=seed, horizon=p["horizon"])
    return {
        "pricing.csv": (["step", "mean_price"], list(enumerate(mean_price))),
        "pricing_summary.csv": (["metric", "value"], [("violation_fraction", frac)]),
    }


def sis_params(p):
    from . import sis

    laws = {"poisson": sis.poisson_degree_law, "powerlaw": sis.powerlaw_degree_law,
            "exponential": sis.exponential_degree_law}
    if p["law"] not in laws:
        raise ConfigError(f"unknown degree law {p['law']!r}")
    return sis.SisParams(p["beta"], p["delta"], laws[p["law"]](p["law_param"], p["d_max"]))


def study_sis(p, seed, jobs):
    from . import sis

    params = sis_params(p)
    s_az, s_obs, s_flt, s_pc = _subseeds(seed, 4)
    table = sis.azuma_check(params, p["sizes"], p["trials"], s_az, epochs=p["epochs"],
                            rho0=p["rho0"], network=p["network"])
    noise = sis.NoiseModel(p["filter_n"], p["filter_m"])
    rho0 = np.full(params.d_max, p["rho0"])
    truth, obs = sis.simulate_observations(params, noise, rho0, p["filter_epochs"], s_obs)
    kw = {"seed": s_flt} if p["filter"] == "particle" else {}
    est = sis.track_profile(params, noise, obs, rho0, p["var0"], filter=p["filter"], **kw)
    filt = [(k, d, truth[k, d - 1], est[k, d - 1]) for k in range(est.shape[0]) for d in params.degrees]
    bound = sis.pcrlb_recursion(params, noise, p["pcrlb_horizon"], p["mc_draws"], s_pc, var0=p["var0"])
    return {
        "sis_azuma.csv": (["N", "q90_sup_gap"], table.rows + [("slope", table.slope)]),
        "sis_filter.csv": (["epoch", "degree", "truth", "estimate"], filt),
        "sis_pcrlb.csv": (["epoch", "bound"], list(enumerate(bound))),
    }


def study_degdist(p, seed, jobs):
    from .degdist import step_size_scaling
    from .graphs import DupDelParams

    rows, slope = step_size_scaling(DupDelParams.static(p["p_dup"], p["q_copy"]), p["eps"], p["trials"],
                                    seed=seed, n0=p["n0"])
    return {"degdist.csv": (["eps", "mse"], rows + [("slope", slope)])}


def gce_params(p):
    from .gce import GceParams

    return GceParams(p["b_red"], p["m"], ((p["h_bb"], p["h_br"]), (p["h_rb"], p["h_rr"])),
                     p["delta0"], p["reciprocal"])


def _gce_one(args):
    from .gce import ratio_trace

    params, steps, every, ss = args
    return ratio_trace(params, steps, ss, every)


def study_gce(p, seed, jobs):
    params = gce_params(p)
    children = np.random.SeedSequence(seed).spawn(p["runs"])
    traces = _pool_map(_gce_one, [(params, p["steps"], p["every"], c) for c in children], jobs)
    rows = [(run, k, r) for run, tr in enumerate(traces) for k, r in tr]
    return {"gce.csv": (["run", "step", "ratio"], rows)}


def study_poll(p, seed, jobs):
    from . import polling

    fx_seed, mc_seed = _subseeds(seed, 2)
    if p["fixture"] == "er":
        g = polling.er_poll_fixture(p["n"], p["mean_degree"], p["p1"], fx_seed)
    elif p["fixture"] == "correlated":
        g = polling.degree_correlated_fixture(p["n"], p["mean_degree"], p["p1"], fx_seed)
    elif p["fixture"] == "homogeneous":
        g = polling.er_poll_fixture(p["n"], p["mean_degree"], 1.0, fx_seed)
    else:
        raise ConfigError(f"unknown fixture {p['fixture']!r}")
    methods = tuple(x.strip() for x in p["methods"].split(",") if x.strip())
    unknown = set(methods) - set(polling.METHODS)
    if unknown:
        raise ConfigError(f"unknown methods {sorted(unknown)}")
    rows = polling.mse_compare(g, p["k"], p["trials"], mc_seed, methods)
    return {"poll.csv": (["method", "k", "bias", "variance", "mse", "r", "rho"],
                         [(r.method, r.k, r.bias, r.variance, r.mse, r.r, r.rho) for r in rows])}


STUDIES = {
    "qd": (study_qd, "stopping-set study of quickest detection"),
    "herding": (study_herding, "herding regions over a risk-aversion grid"),
    "cascade": (study_cascade, "time to information cascade"),
    "pricing": (study_pricing, "optimal price sequence and supermartingale check"),
    "sis": (study_sis, "mean-field accuracy, filtering and PCRLB for SIS"),
    "degdist": (study_degdist, "step-size scaling of the degree tracker"),
    "gce": (study_gce, "glass-ceiling influence-ratio trace"),
    "poll": (study_poll, "polling MSE comparison"),
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="socsense", description="Seeded social-sensing experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in STUDIES.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="INI file with a [%s] section" % name)
        sp.add_argument("--seed", type=int, help="master seed (required here or in [run])")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="K=V", dest="overrides")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params, cfg_seed = load_config(args.command, args.config, args.overrides)
        seed = args.seed if args.seed is not None else cfg_seed
        if seed is None:
            raise ConfigError("a seed is required (--seed or [run] seed)")
        if seed < 0:
            raise ConfigError("seed must be nonnegative")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        digest = config_hash(args.command, params)
        study = STUDIES[args.command][0]
        try:
            outputs = study(params, seed, args.jobs)
        except NumericFailure:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in outputs.items():
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(header, rows, seed, digest))
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))

"""Command line entry point: ``gaussrep <subcommand> [options]``.

Every run merges a YAML/JSON config with command line overrides, writes its
CSV output plus ``summary.json`` into ``--out`` and exits with

* 0 on success (or for reporting subcommands),
* 1 when a declared tolerance is missed,
* 2 when a parameter lies outside its window or the config is invalid,
* 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats

from . import frac_calc, io, pathwise, replicate, verify
from .gp_sim import FBM, FactorizationError, StationaryExp, check_class_membership, check_smallball_conditions
from .gp_sim import sample_paths
from .grid import GridFunction, TimeGrid

EXIT_OK, EXIT_TOLERANCE, EXIT_WINDOW, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULTS = {
    "model": {"name": "fbm", "H": 0.75},
    "grid": {"T": 1.0, "N": 4096},
    "paths": 200,
}


class ConfigError(ValueError):
    pass


def build_model(spec: dict):
    name = str(spec.get("name", "fbm")).lower()
    if name == "fbm":
        return FBM(float(spec.get("H", 0.75)))
    if name in ("stationary_exp", "exp"):
        return StationaryExp(float(spec.get("exponent", spec.get("alpha", 0.75))))
    if name == "table":
        if "file" not in spec:
            raise ConfigError("table model needs 'file'")
        return io.read_kernel_table(spec["file"], float(spec.get("exponent", 0.75)))
    raise ConfigError(f"unknown model {name!r}")


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = io.load_config(args.config) if args.config else {}
    cfg = _merge(DEFAULTS, cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.paths is not None:
        cfg["paths"] = args.paths
    if args.grid is not None:
        cfg["grid"]["N"] = args.grid
    if args.horizon is not None:
        cfg["grid"]["T"] = args.horizon
    if args.H is not None:
        cfg["model"] = {"name": "fbm", "H": args.H}
    for key in ("alpha", "gamma", "eta", "beta", "kappa", "a", "v", "K", "theta", "delta", "level", "n_max", "tol", "s"):
        val = getattr(args, key, None)
        if val is not None:
            cfg.setdefault("params", {})[key] = val
    if args.command == "ito-check" and args.rule:
        cfg.setdefault("params", {})["rule"] = args.rule
    if "seed" not in cfg:
        raise ConfigError("a master seed is mandatory (--seed or 'seed' in the config)")
    return cfg


def _grid(cfg) -> TimeGrid:
    return TimeGrid.uniform(float(cfg["grid"]["T"]), int(cfg["grid"]["N"]))


def _p(cfg, key, default):
    return cfg.get("params", {}).get(key, default)


# ---------------------------------------------------------------------------
# subcommands; each returns (summary, passed) with passed None for reports
# ---------------------------------------------------------------------------


def cmd_simulate(cfg, out: Path):
    model = build_model(cfg["model"])
    batch = sample_paths(model, _grid(cfg), int(cfg["paths"]), int(cfg["seed"]))
    io.write_batch(out / "paths.csv", batch)
    return {"model": model.tag, "paths": len(batch), "final_var": float(np.var(batch.values[:, -1]))}, None


def cmd_check_class(cfg, out: Path):
    model = build_model(cfg["model"])
    alpha = float(_p(cfg, "alpha", 0.75))
    grid = _grid(cfg)
    delta = float(_p(cfg, "delta", grid.horizon / 2))
    rep = check_class_membership(model, alpha, delta, grid)
    d = rep.as_dict()
    io.write_csv(out / "class.csv", ["condition", "holds"], [(k, d[k]) for k in
                 ("positive_covariance", "holder_bound", "quadratic_lower_bound", "bounded_ratio")])
    return {"report": d, "passed": rep.passed}, None


def cmd_check_smallball_conditions(cfg, out: Path):
    model = build_model(cfg["model"])
    rep = check_smallball_conditions(model, _grid(cfg), window=float(_p(cfg, "delta", 1.0)))
    d = rep.as_dict()
    io.write_csv(out / "smallball_conditions.csv", ["key", "value"], [(k, v) for k, v in d.items() if np.isscalar(v)])
    return {"report": d}, None


def frac_oracle(n: int = 2**12):
    """Power-function derivative oracle and GLS order-independence."""
    rows = [
        (mu, beta, *frac_calc.power_oracle_errors(mu, beta, n))
        for mu in (0.5, 1.0, 2.0)
        for beta in (0.25, 0.5, 0.75)
    ]
    grid = TimeGrid.uniform(1.0, n)
    f = GridFunction(grid, grid.points)
    gls = {b: frac_calc.gls_integral(f, f, b) for b in (0.3, 0.45)}
    return rows, gls


def cmd_frac_oracle(cfg, out: Path):
    tol = float(_p(cfg, "tol", 1e-3))
    rows, gls = frac_oracle(int(cfg["grid"]["N"]))
    io.write_csv(out / "frac_oracle.csv", ["mu", "beta", "max_rel_error", "coarse_error"], rows)
    worst = max(r[2] for r in rows)
    refines = all(frac_calc.refines(r[2], r[3]) for r in rows)
    vals = list(gls.values())
    gls_ok = abs(vals[0] - vals[1]) <= tol and all(abs(v - 0.5) <= tol for v in vals)
    passed = worst <= tol and refines and gls_ok
    return {"max_rel_error": worst, "refines": refines, "gls": {str(k): v for k, v in gls.items()}}, passed


def _rule(cfg) -> pathwise.BVRule:
    name = _p(cfg, "rule", "indicator")
    return pathwise.BVRule(name, K=float(_p(cfg, "K", 0.0)), eta=float(_p(cfg, "eta", 1.0)))


def cmd_ito_check(cfg, out: Path):
    model = build_model(cfg["model"])
    grid = _grid(cfg)
    rule = _rule(cfg)
    u = float(_p(cfg, "s", 0.0))
    tol = float(_p(cfg, "tol", 5e-2))
    batch = sample_paths(model, grid, int(cfg["paths"]), int(cfg["seed"]))
    res = np.array([pathwise.ito_residual(model, rule, u, X) for X in batch])
    io.write_csv(out / "ito_residuals.csv", ["path", "residual"], zip(batch.indices, res))
    med = float(np.median(np.abs(res)))
    return {"rule": rule.name, "median_abs_residual": med, "tol": tol}, med <= tol


def cmd_replicate_dist(cfg, out: Path):
    model = build_model(cfg["model"])
    grid = _grid(cfg)
    v = float(_p(cfg, "v", 0.5))
    params = _lemma(cfg, model)
    target = str(_p(cfg, "target", "normal"))
    if target != "normal":
        raise ConfigError("replicate-dist supports target=normal")
    batch = sample_paths(model, grid, int(cfg["paths"]), int(cfg["seed"]))
    sched = replicate.partition_schedule(params.gamma, grid.horizon, int(_p(cfg, "n_max", 200)), start=v)
    outs = [replicate.replicate_distribution(replicate.normal_quantile(), model, X, v, params, sched) for X in batch]
    ach = np.array([o.achieved for o in outs])
    ok = np.array([o.success for o in outs])
    io.write_csv(out / "replicated.csv", ["path", "target", "achieved", "success"],
                 zip(batch.indices, [o.target for o in outs], ach, ok))
    D, p = verify.ks_test(ach, stats.norm.cdf)
    passed = D <= float(_p(cfg, "ks_tol", 0.08)) and ok.mean() >= 0.99
    return {"ks_D": D, "ks_p": p, "success_rate": float(ok.mean()), "pass": bool(passed)}, passed


def _lemma(cfg, model):
    alpha = float(_p(cfg, "alpha", model.alpha))
    base = replicate.default_lemma_params(alpha)
    return replicate.LemmaParams(alpha, float(_p(cfg, "gamma", base.gamma)), float(_p(cfg, "eta", base.eta)))


def cmd_replicate_rv(cfg, out: Path):
    model = build_model(cfg["model"])
    grid = _grid(cfg)
    spec = replicate.TargetSpec.call(grid.horizon, float(_p(cfg, "K", 0.2)))
    params = _lemma(cfg, model)
    batch = sample_paths(model, grid, int(cfg["paths"]), int(cfg["seed"]))
    outs = [replicate.replicate_rv(spec, model, X, params=params) for X in batch]
    err = np.array([o.diagnostics["errors"] for o in outs])
    med = np.median(err, axis=0)
    io.write_csv(out / "rv_errors.csv", ["n", "median_abs_error"], enumerate(med, start=1))
    tol = float(_p(cfg, "tol", 0.05))
    return {"median_error_by_n": med, "tol": tol}, bool(med[-1] <= tol)


def _holder(cfg, model):
    alpha = float(_p(cfg, "alpha", model.alpha))
    a = float(_p(cfg, "a", alpha - 0.05))
    base = replicate.default_holder_params(alpha, a, float(_p(cfg, "theta", 1.0)))
    return replicate.HolderParams(
        alpha, a, float(_p(cfg, "beta", base.beta)), float(_p(cfg, "gamma", base.gamma)),
        float(_p(cfg, "kappa", base.kappa)), base.theta,
    )


def cmd_replicate_holder(cfg, out: Path):
    model = build_model(cfg["model"])
    grid = _grid(cfg)
    params = _holder(cfg, model)
    n_max = int(_p(cfg, "n_max", 30))
    batch = sample_paths(model, grid, int(cfg["paths"]), int(cfg["seed"]))
    outs = [replicate.replicate_holder(replicate.HolderTarget("path"), model, X, params, n_max=n_max) for X in batch]
    err = np.array([o.error for o in outs])
    io.write_csv(out / "holder_errors.csv", ["path", "target", "achieved", "error"],
                 zip(batch.indices, [o.target for o in outs], [o.achieved for o in outs], err))
    tol = float(_p(cfg, "tol", 0.05))
    frac = float(np.mean(err <= tol))
    return {"fraction_within_tol": frac, "median_error": float(np.median(err)), "params": vars(params)}, frac >= 0.9


def cmd_verify_smallball(cfg, out: Path):
    model = build_model(cfg["model"])
    s = float(_p(cfg, "s", 0.5))
    span = float(_p(cfg, "delta", 0.1))
    eps = np.linspace(0.02, 0.1, 9)
    rep = verify.smallball_shape(model, s, s + span, eps, int(cfg["paths"]), int(cfg["seed"]))
    d = rep.as_dict()
    io.write_csv(out / "smallball.csv", ["eps", "p", "p_half_step"], zip(eps, d["p_coarse"], d["p_fine"]))
    return d, rep.passed


def cmd_verify_crossing(cfg, out: Path):
    model = build_model(cfg["model"])
    s = float(_p(cfg, "s", 0.5))
    lags = np.linspace(0.01, 0.2, 8)
    sw = verify.crossing_sweep(model, s, lags, int(cfg["paths"]), int(cfg["seed"]))
    rows = [(r.s, r.t, r.empirical.estimate, r.empirical.se, r.bound, r.implied_C, r.symmetric) for r in sw.reports]
    io.write_csv(out / "crossing.csv", ["s", "t", "empirical", "se", "bound", "implied_C", "symmetric"], rows)
    return {"ratio": sw.ratio, "symmetric": sw.symmetric}, sw.passed()


def cmd_demo_zero_integral(cfg, out: Path):
    model = build_model(cfg["model"])
    rep = verify.zero_integral_demo(
        model, float(_p(cfg, "K", 0.2)), _grid(cfg), _holder(cfg, model), int(cfg["seed"]), int(cfg["paths"])
    )
    io.write_csv(out / "zero_integral.csv", ["gap", "ito_gap", "occupation"],
                 zip(rep.integral_gap, rep.ito_gap, rep.occupation))
    return rep.summary(), rep.passed()


COMMANDS = {
    "simulate": cmd_simulate,
    "check-class": cmd_check_class,
    "check-smallball-conditions": cmd_check_smallball_conditions,
    "frac-oracle": cmd_frac_oracle,
    "ito-check": cmd_ito_check,
    "replicate-dist": cmd_replicate_dist,
    "replicate-rv": cmd_replicate_rv,
    "replicate-holder": cmd_replicate_holder,
    "verify-smallball": cmd_verify_smallball,
    "verify-crossing": cmd_verify_crossing,
    "demo-zero-integral": cmd_demo_zero_integral,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run config")
    common.add_argument("--seed", type=int, help="master seed (mandatory here or in the config)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--paths", type=int, help="Monte Carlo count")
    common.add_argument("--grid", type=int, help="number of grid cells N")
    common.add_argument("--horizon", type=float, help="time horizon T")
    common.add_argument("--H", type=float, help="use fractional Brownian motion with this Hurst index")
    for name in ("alpha", "gamma", "eta", "beta", "kappa", "a", "v", "K", "theta", "delta", "level", "tol", "s"):
        common.add_argument(f"--{name}", type=float)
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--rule", choices=["constant", "sign", "indicator", "power_sign"])
    parser = argparse.ArgumentParser(prog="gaussrep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        summary, passed = COMMANDS[args.command](cfg, out)
    except replicate.WindowError as exc:
        print(f"window violation: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except (FactorizationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    summary = {
        "command": args.command,
        "config": cfg,
        "seed": cfg["seed"],
        "runtime_s": round(time.perf_counter() - start, 3),
        "passed": passed,
        "result": summary,
    }
    io.write_summary(out / "summary.json", summary)
    print(f"{args.command}: {'report' if passed is None else ('PASS' if passed else 'FAIL')} -> {out / 'summary.json'}")
    return EXIT_OK if passed in (None, True) else EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())

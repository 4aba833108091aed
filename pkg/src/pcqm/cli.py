"""Command-line front end: ``pcqm estimate | simulate | benchmark | diagnose``.

Exit codes: 0 success, 1 configuration/IO error (including all-censored
input), 2 estimator not applicable to the request, 3 numeric failure.
"""
import argparse
import csv
import functools
import itertools
import json
import math
import os
import sys
from importlib import resources

from . import estimators as est_mod
from .errors import (
    AllCensoredError,
    ConfigError,
    DomainError,
    NotApplicableError,
    NumericError,
    PCQMError,
)
from .evaluate import BenchmarkConfig, make_pattern, run_benchmark, write_outputs
from .fileio import (
    fmt,
    read_sample_csv,
    write_pattern_csv,
    write_sample_csv,
    write_window_json,
)
from .ingest import true_density
from .model import NbdModel, asymptotic_bias_pair, delta1
from .simulate import derive_rng, lhs_focal_points, pcqm_sample

EXIT_OK, EXIT_CONFIG, EXIT_NOT_APPLICABLE, EXIT_NUMERIC = 0, 1, 2, 3


# --------------------------------------------------------------------------
# config loading
# --------------------------------------------------------------------------

def bundled_configs():
    root = resources.files("pcqm") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config_json(ref):
    """Read a config by path, or by bundled name when no such file exists."""
    if os.path.exists(ref):
        path = os.path.abspath(ref)
        try:
            with open(path) as fh:
                return json.load(fh), os.path.dirname(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ref}: {exc}") from None
    name = ref[:-5] if ref.endswith(".json") else ref
    if name in bundled_configs():
        text = (resources.files("pcqm") / "configs" / f"{name}.json").read_text()
        return json.loads(text), os.getcwd()
    raise ConfigError(f"config {ref!r} is neither a file nor a bundled config "
                      f"({', '.join(bundled_configs())})")


def _benchmark_config(args):
    data, base = load_config_json(args.config)
    if isinstance(data, dict) and "config" in data and "process" not in data:
        data = data["config"]
    data = dict(data)
    if args.seed is not None:
        data["master_seed"] = args.seed
    if getattr(args, "estimator", None):
        data["estimators"] = [args.estimator]
    design = dict(data.get("design", {}))
    for flag, key in (("ell", "ell"), ("q", "q"), ("radius", "C")):
        v = getattr(args, flag, None)
        if v is not None:
            design[key] = v
    data["design"] = design
    return BenchmarkConfig.from_dict(data, base)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

ESTIMATE_COLUMNS = ("estimator", "lambda_hat", "k_hat", "valid", "warnings")


def _estimator_fn(name, lambda_init):
    fn = est_mod.ESTIMATORS[name]
    if lambda_init is not None and name in ("shen_censored", "morisita_censored"):
        fn = functools.partial(fn, lambda_init=lambda_init)
    return fn


def cmd_estimate(args, out):
    C = math.inf if args.radius is None else args.radius
    s = read_sample_csv(args.input, ell=args.ell, C=C, q=args.q)
    if s.n0 == s.nq:
        raise AllCensoredError(f"{args.input}: every sector is censored")
    if args.estimator == "all":
        names = est_mod.CENSORED_ESTIMATORS if s.n0 else est_mod.COMPLETE_ESTIMATORS
        tolerant = True
    else:
        try:
            names = [est_mod.canonical_name(args.estimator)]
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
        tolerant = False
    rows = []
    for name in names:
        fn = _estimator_fn(name, args.lambda_init)
        try:
            e = fn(s)
        except PCQMError as exc:
            if not tolerant:
                raise
            tag = "not-applicable" if isinstance(exc, NotApplicableError) else type(exc).__name__
            e = est_mod.DensityEstimate(math.nan, name, valid=False, warnings=[f"{tag}: {exc}"])
        rows.append(e)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(ESTIMATE_COLUMNS)
    for e in rows:
        w.writerow([e.estimator_id, fmt(e.lambda_hat), fmt(e.k_hat), int(e.valid),
                    "; ".join(e.warnings)])
    return EXIT_OK


def cmd_simulate(args, out):
    cfg = _benchmark_config(args)
    scenarios = cfg.scenarios()
    if len(scenarios) != 1:
        raise ConfigError(f"simulate needs a single scenario; config expands to {len(scenarios)}")
    sc = scenarios[0]
    pattern = make_pattern(cfg, sc, 0, {})
    focals = lhs_focal_points(sc.design, sc.window, derive_rng(cfg.master_seed, sc.index, 1, 0, 0))
    sample = pcqm_sample(pattern, focals, sc.design)
    os.makedirs(args.out, exist_ok=True)
    write_pattern_csv(os.path.join(args.out, "pattern.csv"), pattern)
    write_window_json(os.path.join(args.out, "window.json"), pattern.window)
    write_sample_csv(os.path.join(args.out, "sample.csv"), sample)
    manifest = {
        "command": "simulate",
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "scenario_id": sc.scenario_id,
        "intensity": sc.lambda_nominal,
        "realized_intensity": true_density(pattern),
        "point_count": len(pattern),
        "censored_rate": sample.p0,
        "design": {"n": sc.design.n, "q": sc.design.q, "ell": sc.design.ell,
                   "C": sc.design.C, "buffer": sc.design.buffer},
        "outputs": ["pattern.csv", "window.json", "sample.csv"],
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(pattern)} points and a {sample.n}x{sample.q} sample "
          f"(censored rate {sample.p0:.4f}) to {args.out}", file=out)
    return EXIT_OK


def cmd_benchmark(args, out):
    cfg = _benchmark_config(args)
    scenarios = cfg.scenarios()
    cells = cfg.cell_count()
    if args.dry_run:
        print(f"config ok: {len(scenarios)} scenario(s), {cells} cell(s), "
              f"{len(cfg.estimators)} estimator(s)", file=out)
        for sc in scenarios:
            print(f"  {sc.scenario_id}", file=out)
        return EXIT_OK
    result = run_benchmark(cfg, threads=args.threads)
    files = write_outputs(result, args.out)
    print(f"{cells} cell(s) across {len(scenarios)} scenario(s); wrote {len(files)} file(s) "
          f"to {args.out}", file=out)
    return EXIT_OK


DIAGNOSE_COLUMNS = ("ell", "q", "lambda", "k", "C", "u", "bias_Mu", "bias_E", "delta1",
                    "dominance", "note")
_GRID_KEYS = ("ell", "q", "lambda", "k", "C", "u")


def _as_list(v):
    return v if isinstance(v, list) else [v]


def _parse_floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _diagnose_grid(args):
    if args.config is not None:
        data, _ = load_config_json(args.config)
        missing = [k for k in _GRID_KEYS if k not in data]
        if missing:
            raise ConfigError(f"diagnose grid is missing {missing}")
        grid = {k: _as_list(data[k]) for k in _GRID_KEYS}
    else:
        grid = {"ell": [1], "q": [4], "lambda": [0.05], "k": [2.0], "C": [10.0], "u": [2.0]}
    for flag, key in (("ell", "ell"), ("q", "q"), ("lam", "lambda"), ("k", "k"),
                      ("radius", "C"), ("u", "u")):
        v = getattr(args, flag, None)
        if v is not None:
            grid[key] = v if isinstance(v, list) else [v]
    return grid


def cmd_diagnose(args, out):
    grid = _diagnose_grid(args)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(DIAGNOSE_COLUMNS)
    n_valid = n_dom = 0
    for ell, q, lam, k, C, u in itertools.product(*(grid[key] for key in _GRID_KEYS)):
        row = [ell, q, lam, k, C, u]
        try:
            m = NbdModel(lam, k, q, ell)
            b_mu, b_e = asymptotic_bias_pair(m, u, C)
            d1 = delta1(ell, u, lam, q, C)
        except (DomainError, NumericError) as exc:
            w.writerow(row + ["", "", "", "skipped", str(exc)])
            continue
        n_valid += 1
        if u == 0:
            verdict = "equal"
            n_dom += 1
        else:
            dominated = abs(b_e) < abs(b_mu)
            verdict = "holds" if dominated else "fails"
            n_dom += dominated
        w.writerow(row + [fmt(b_mu), fmt(b_e), fmt(d1), verdict, ""])
    print(f"dominance |B(E)| < |B(M_u)| holds in {n_dom}/{n_valid} evaluated cell(s)",
          file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="pcqm", description="PCQM density estimation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="apply estimators to a distance-sample CSV")
    e.add_argument("input", help="CSV with columns point_id,sector_id,distance,censored")
    e.add_argument("--estimator", default="all", help="estimator name or 'all'")
    e.add_argument("--ell", type=int, default=1)
    e.add_argument("--q", type=int, default=None, help="expected sectors per point")
    e.add_argument("--radius", type=float, default=None, help="censoring radius C")
    e.add_argument("--lambda-init", type=float, default=None,
                   help="density seed for the imputed-moment estimators")
    e.add_argument("--out", default=None, help="write the table here instead of stdout")

    for name, helptext in (("simulate", "generate a pattern and one PCQM sample"),
                           ("benchmark", "run a replicated benchmark")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="config file or bundled config name")
        s.add_argument("--seed", type=int, default=None, help="override master_seed")
        s.add_argument("--out", default=f"{name}_out", help="output directory")
        s.add_argument("--ell", type=int, default=None)
        s.add_argument("--q", type=int, default=None)
        s.add_argument("--radius", type=float, default=None)
        s.add_argument("--estimator", default=None, help="override the estimator list")
        if name == "benchmark":
            s.add_argument("--threads", type=int, default=1)
            s.add_argument("--dry-run", action="store_true",
                           help="validate and count cells without running")

    d = sub.add_parser("diagnose", help="asymptotic bias diagnostics under NBD truth")
    d.add_argument("--config", default=None, help="grid file or bundled name (sm_subset_grid)")
    d.add_argument("--ell", type=lambda t: [int(v) for v in t.split(",")], default=None)
    d.add_argument("--q", type=lambda t: [int(v) for v in t.split(",")], default=None)
    d.add_argument("--lambda", dest="lam", type=_parse_floats, default=None)
    d.add_argument("--k", type=_parse_floats, default=None)
    d.add_argument("--u", type=_parse_floats, default=None)
    d.add_argument("--radius", type=_parse_floats, default=None)
    d.add_argument("--out", default=None, help="write the table here instead of stdout")
    return p


_COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate,
             "benchmark": cmd_benchmark, "diagnose": cmd_diagnose}


def _exit_code(exc):
    if isinstance(exc, NotApplicableError):
        return EXIT_NOT_APPLICABLE
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def main(argv=None):
    args = build_parser().parse_args(argv)
    fn = _COMMANDS[args.command]
    out_path = args.out if args.command in ("estimate", "diagnose") else None
    try:
        if out_path:
            with open(out_path, "w", newline="") as fh:
                return fn(args, fh)
        return fn(args, sys.stdout)
    except (PCQMError, OSError) as exc:
        print(f"pcqm {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())

"""Replication engine and accuracy metrics.

A benchmark config describes one or more scenarios (list-valued process or
design fields expand into a grid). Each scenario draws ``n_patterns`` point
patterns and ``n_designs_per_pattern`` survey designs per pattern, applies
every estimator to each resulting PCQM sample and summarizes the relative
errors against the realized density of the pattern.
"""
import copy
import csv
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, IngestError
from .estimators import CENSORED_ESTIMATORS, canonical_name, run_estimator
from .fileio import fmt
from .ingest import filter_abundant, load_stem_map, species_pattern, true_density
from .simulate import (
    StudyWindow,
    SurveyDesign,
    derive_rng,
    gen_poisson,
    gen_thomas,
    lhs_focal_points,
    pcqm_sample,
)

__all__ = [
    "r_bias",
    "r_rmse",
    "r_sd",
    "BenchmarkConfig",
    "Scenario",
    "BenchmarkResult",
    "make_pattern",
    "run_benchmark",
    "write_outputs",
    "SUMMARY_COLUMNS",
    "REPLICATE_COLUMNS",
]


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def _check(estimates, truth, min_count=1):
    est = np.asarray(estimates, dtype=float).ravel()
    if est.size < min_count:
        raise DomainError(f"need at least {min_count} estimate(s), got {est.size}")
    if not (truth > 0 and math.isfinite(truth)):
        raise DomainError(f"truth must be positive, got {truth}")
    return est


def r_bias(estimates, truth):
    """(mean(estimates) - truth) / truth."""
    est = _check(estimates, truth)
    return (est.mean() - truth) / truth


def r_rmse(estimates, truth):
    """Root mean squared error over ``truth``, divisor = number of estimates."""
    est = _check(estimates, truth)
    return math.sqrt(np.mean((est - truth) ** 2)) / truth


def r_sd(estimates, truth):
    """Sample standard deviation (divisor count - 1) over ``truth``."""
    est = _check(estimates, truth, 2)
    return float(np.std(est, ddof=1)) / truth


def _relative_metrics(rel):
    # rel = (estimate - truth) / truth per replicate
    n = rel.size
    if n == 0:
        return math.nan, math.nan, math.nan
    bias = float(rel.mean())
    rmse = math.sqrt(float(np.mean(rel * rel)))
    sd = float(np.std(rel, ddof=1)) if n > 1 else math.nan
    return bias, rmse, sd


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_PROCESS_KEYS = {
    "csr": {"type", "lambda"},
    "thomas": {"type", "lambda", "kappa", "mu", "sigma"},
    "species": {"type", "stem_map", "window", "min_count", "species", "strict"},
}
_DESIGN_KEYS = ("n", "q", "ell", "C", "buffer")
_SWEEPABLE = {"process": ("lambda", "kappa", "mu", "sigma"), "design": ("n", "q", "ell", "C")}
_TOP_KEYS = {"name", "process", "window", "design", "n_patterns", "n_designs_per_pattern",
             "estimators", "master_seed"}


@dataclass(frozen=True)
class Scenario:
    index: int
    scenario_id: str
    process: dict
    design: SurveyDesign
    window: StudyWindow
    lambda_nominal: float
    species: str | None = None


def _positive_int(name, v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{name} must be a positive integer, got {v!r}")
    return v


def _label(v):
    return f"{v:g}" if isinstance(v, float) else str(v)


@dataclass
class BenchmarkConfig:
    name: str
    process: dict
    design: dict
    n_patterns: int
    n_designs_per_pattern: int
    estimators: list
    master_seed: int
    window: dict | None = None
    base_dir: str = field(default=".", repr=False, compare=False)

    @classmethod
    def from_dict(cls, d, base_dir="."):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in d and "process" not in d:
            d = d["config"]  # a run manifest
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for key in ("process", "design", "n_patterns", "n_designs_per_pattern", "estimators",
                    "master_seed"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        cfg = cls(
            name=str(d.get("name", "benchmark")),
            process=copy.deepcopy(d["process"]),
            design=copy.deepcopy(d["design"]),
            n_patterns=d["n_patterns"],
            n_designs_per_pattern=d["n_designs_per_pattern"],
            estimators=list(d["estimators"]) if isinstance(d["estimators"], list) else [d["estimators"]],
            master_seed=d["master_seed"],
            window=copy.deepcopy(d.get("window")),
            base_dir=base_dir,
        )
        if isinstance(cfg.process, dict) and cfg.process.get("type") == "species":
            # pin file references so a manifest replays from any directory
            for key in ("stem_map", "window"):
                if isinstance(cfg.process.get(key), str):
                    cfg.process[key] = os.path.abspath(cfg._resolve(cfg.process[key]))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data, os.path.dirname(os.path.abspath(path)))

    def to_dict(self):
        d = {
            "name": self.name,
            "process": copy.deepcopy(self.process),
            "design": copy.deepcopy(self.design),
            "n_patterns": self.n_patterns,
            "n_designs_per_pattern": self.n_designs_per_pattern,
            "estimators": list(self.estimators),
            "master_seed": self.master_seed,
        }
        if self.window is not None:
            d["window"] = copy.deepcopy(self.window)
        return d

    def _resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def validate(self):
        _positive_int("n_patterns", self.n_patterns)
        _positive_int("n_designs_per_pattern", self.n_designs_per_pattern)
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int) \
                or self.master_seed < 0:
            raise ConfigError(f"master_seed must be a non-negative integer, got {self.master_seed!r}")
        if not self.estimators:
            raise ConfigError("estimator list is empty")
        names = []
        for e in self.estimators:
            if e == "all":
                names.extend(CENSORED_ESTIMATORS)
                continue
            try:
                names.append(canonical_name(e))
            except KeyError as exc:
                raise ConfigError(str(exc.args[0])) from None
        self.estimators = list(dict.fromkeys(names))
        if not isinstance(self.process, dict) or "type" not in self.process:
            raise ConfigError("process must be an object with a 'type'")
        kind = self.process["type"]
        if kind not in _PROCESS_KEYS:
            raise ConfigError(f"process type must be one of {sorted(_PROCESS_KEYS)}, got {kind!r}")
        unknown = set(self.process) - _PROCESS_KEYS[kind]
        if unknown:
            raise ConfigError(f"unknown {kind} process keys {sorted(unknown)}")
        unknown = set(self.design) - set(_DESIGN_KEYS)
        if unknown:
            raise ConfigError(f"unknown design keys {sorted(unknown)}")
        if kind == "species":
            if "stem_map" not in self.process:
                raise ConfigError("species process needs 'stem_map'")
            if self.n_patterns != 1:
                raise ConfigError("species scenarios use the census itself: n_patterns must be 1")
        else:
            if self.window is None:
                raise ConfigError(f"{kind} process needs a 'window'")
            StudyWindow.from_dict(self.window)
        if kind == "csr" and "lambda" not in self.process:
            raise ConfigError("csr process needs 'lambda'")
        if kind == "thomas":
            if "sigma" not in self.process or "mu" not in self.process:
                raise ConfigError("thomas process needs 'mu' and 'sigma'")
            if ("kappa" in self.process) == ("lambda" in self.process):
                raise ConfigError("thomas process needs exactly one of 'kappa' or 'lambda'")
        # building the scenarios validates every swept value
        self.scenarios()

    def _sweep_axes(self):
        axes = []
        for section, keys in _SWEEPABLE.items():
            src = getattr(self, section)
            for key in keys:
                v = src.get(key)
                if isinstance(v, list):
                    if not v:
                        raise ConfigError(f"{section}.{key} sweep list is empty")
                    axes.append((section, key, v))
        return axes

    def scenarios(self):
        axes = self._sweep_axes()
        combos = list(itertools.product(*[vals for _, _, vals in axes])) if axes else [()]
        out = []
        species_list = [None]
        smap = None
        if self.process["type"] == "species":
            smap = self._stem_map()
            codes = self.process.get("species")
            if codes is None:
                codes = filter_abundant(smap, self.process.get("min_count", 1))
            elif isinstance(codes, str):
                codes = [codes]
            known = set(smap.species)
            for c in codes:
                if c not in known:
                    raise ConfigError(f"species {c!r} not in stem map")
            if not codes:
                raise ConfigError("no species meet the abundance threshold")
            species_list = list(codes)
        for combo in combos:
            proc = {k: v for k, v in self.process.items()}
            des = {k: v for k, v in self.design.items()}
            parts = []
            for (section, key, _), v in zip(axes, combo):
                (proc if section == "process" else des)[key] = v
                parts.append(f"{key}{_label(v)}")
            try:
                design = SurveyDesign(**des)
            except TypeError as exc:
                raise ConfigError(f"bad design: {exc}") from None
            for code in species_list:
                sid = "_".join([self.name] + parts + ([f"species{code}"] if code else []))
                if smap is not None:
                    window = smap.window
                    nominal = math.nan
                else:
                    window = StudyWindow.from_dict(self.window)
                    nominal = self._nominal(proc)
                window.buffered(design.buffer)  # ConfigError when degenerate
                out.append(Scenario(len(out), sid, proc, design, window, nominal, code))
        return out

    def _nominal(self, proc):
        for key in ("lambda", "kappa", "mu", "sigma"):
            if key in proc and not (isinstance(proc[key], (int, float)) and proc[key] > 0):
                raise ConfigError(f"process {key} must be positive, got {proc[key]!r}")
        if proc["type"] == "csr":
            return float(proc["lambda"])
        if "lambda" in proc:
            return float(proc["lambda"])
        return float(proc["kappa"]) * float(proc["mu"])

    def _stem_map(self):
        p = self.process
        win = p.get("window")
        if win is None:
            raise ConfigError("species process needs a 'window' descriptor")
        if isinstance(win, str):
            win = self._resolve(win)
        try:
            return load_stem_map(self._resolve(p["stem_map"]), win, strict=p.get("strict", True))
        except IngestError as exc:
            raise ConfigError(f"stem map: {exc}") from None

    def cell_count(self):
        return len(self.scenarios()) * self.n_patterns * self.n_designs_per_pattern


# --------------------------------------------------------------------------
# engine
# --------------------------------------------------------------------------

SUMMARY_COLUMNS = ("scenario_id", "pattern_id", "estimator", "lambda_true", "lambda_nominal",
                   "r_bias", "r_rmse", "r_sd", "mean_censored_rate", "n_valid", "n_invalid")
REPLICATE_COLUMNS = ("scenario_id", "pattern_id", "replicate", "estimator", "lambda_true",
                     "censored_rate", "lambda_hat", "k_hat", "valid", "note")


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    scenarios: list
    summary: list  # rows keyed by SUMMARY_COLUMNS
    replicates: list  # rows keyed by REPLICATE_COLUMNS


def make_pattern(cfg, sc, p, smap_cache):
    """Pattern ``p`` of scenario ``sc`` (the census itself for species scenarios)."""
    if sc.species is not None:
        if "map" not in smap_cache:
            smap_cache["map"] = cfg._stem_map()
        return species_pattern(smap_cache["map"], sc.species)
    rng = derive_rng(cfg.master_seed, sc.index, 0, p)
    proc = sc.process
    if proc["type"] == "csr":
        return gen_poisson(float(proc["lambda"]), sc.window, rng)
    mu = float(proc["mu"])
    kappa = float(proc["kappa"]) if "kappa" in proc else float(proc["lambda"]) / mu
    return gen_thomas(kappa, mu, float(proc["sigma"]), sc.window, rng)


def _run_cell(cfg, sc, pattern, p, d):
    rng = derive_rng(cfg.master_seed, sc.index, 1, p, d)
    focals = lhs_focal_points(sc.design, sc.window, rng)
    s = pcqm_sample(pattern, focals, sc.design)
    return s.p0, [run_estimator(e, s) for e in cfg.estimators]


def _summary_rows(sc, estimators, label, truths, cells):
    rows = []
    rates = np.array([c[0] for c in cells])
    for j, name in enumerate(estimators):
        rel = []
        n_invalid = 0
        for t, (_, ests) in zip(truths, cells):
            e = ests[j]
            if e.valid and t > 0 and math.isfinite(e.lambda_hat):
                rel.append((e.lambda_hat - t) / t)
            else:
                n_invalid += 1
        bias, rmse, sd = _relative_metrics(np.array(rel))
        rows.append({
            "scenario_id": sc.scenario_id, "pattern_id": label, "estimator": name,
            "lambda_true": float(np.mean(truths)), "lambda_nominal": sc.lambda_nominal,
            "r_bias": bias, "r_rmse": rmse, "r_sd": sd,
            "mean_censored_rate": float(rates.mean()),
            "n_valid": len(rel), "n_invalid": n_invalid,
        })
    return rows


def run_benchmark(cfg: BenchmarkConfig, threads=1):
    """Run every (scenario, pattern, design) cell and summarize.

    Cells are independent; each draws from its own stream derived from
    ``master_seed`` and its indices, and results are merged in index order,
    so the output does not depend on ``threads``.
    """
    threads = max(1, int(threads))
    scenarios = cfg.scenarios()
    summary, replicates = [], []
    smap_cache = {}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for sc in scenarios:
            patterns = [make_pattern(cfg, sc, p, smap_cache) for p in range(cfg.n_patterns)]
            truths = [true_density(pat) for pat in patterns]
            keys = [(p, d) for p in range(cfg.n_patterns) for d in range(cfg.n_designs_per_pattern)]
            cells = list(pool.map(lambda k: _run_cell(cfg, sc, patterns[k[0]], *k), keys))
            cell_truths = [truths[p] for p, _ in keys]
            summary.extend(_summary_rows(sc, cfg.estimators, "all", cell_truths, cells))
            if cfg.n_patterns > 1:
                nd = cfg.n_designs_per_pattern
                for p in range(cfg.n_patterns):
                    part = cells[p * nd:(p + 1) * nd]
                    summary.extend(_summary_rows(sc, cfg.estimators, str(p), [truths[p]] * nd, part))
            for (p, d), (p0, ests) in zip(keys, cells):
                for e in ests:
                    replicates.append({
                        "scenario_id": sc.scenario_id, "pattern_id": str(p), "replicate": d,
                        "estimator": e.estimator_id, "lambda_true": truths[p],
                        "censored_rate": p0, "lambda_hat": e.lambda_hat, "k_hat": e.k_hat,
                        "valid": int(e.valid), "note": "; ".join(e.warnings),
                    })
    return BenchmarkResult(cfg, scenarios, summary, replicates)


def _cell(v):
    if isinstance(v, float):
        return fmt(v)
    if v is None:
        return ""
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def write_outputs(result: BenchmarkResult, out_dir):
    """Write per-scenario CSVs, ``summary_all.csv`` and ``manifest.json``.

    Returns the list of file names written (relative to ``out_dir``).
    """
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for sc in result.scenarios:
        srows = [r for r in result.summary if r["scenario_id"] == sc.scenario_id]
        rrows = [r for r in result.replicates if r["scenario_id"] == sc.scenario_id]
        for stem, cols, rows in (("summary", SUMMARY_COLUMNS, srows),
                                 ("replicates", REPLICATE_COLUMNS, rrows)):
            name = f"{stem}_{sc.scenario_id}.csv"
            _write_csv(os.path.join(out_dir, name), cols, rows)
            files.append(name)
    _write_csv(os.path.join(out_dir, "summary_all.csv"), SUMMARY_COLUMNS, result.summary)
    files.append("summary_all.csv")
    manifest = {
        "command": "benchmark",
        "config": result.config.to_dict(),
        "master_seed": result.config.master_seed,
        "scenarios": [sc.scenario_id for sc in result.scenarios],
        "cells": len(result.scenarios) * result.config.n_patterns
        * result.config.n_designs_per_pattern,
        "outputs": files,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files + ["manifest.json"]

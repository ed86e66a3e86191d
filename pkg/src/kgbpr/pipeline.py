"""End-to-end experiment driver.

Config file format (INI, ``key = value``)::

    [experiment]
    input = triples.tsv
    predicates = all            ; or a comma separated list
    methods = bpr, mf, mp, random
    repeats = 5
    seed = 0
    output = results/
    workers = 1

    [hyperparams]               ; shared by every method
    K = 50
    alpha = 0.2
    lambda_s = 0.005
    lambda_o_pos = 0.005
    lambda_o_neg = 0.005
    epochs = 50
    top_n = 10

    [hyperparams.mf]            ; optional per-method overrides
    alpha = 0.05

Seeds are derived from the root seed per (predicate, purpose): the split uses
``(predicate, "split")`` and each method ``(predicate, method)``, so adding or
removing a method never changes another method's draws.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kgbpr import __version__, seeding
from kgbpr.evaluation import METHODS, EvalReport, evaluate, make_split, reports_from_csv, reports_to_csv
from kgbpr.model import HyperParams
from kgbpr.store import graph_from_pairs, read_triples
from kgbpr.topology import (
    PERFORMANCE_METRICS,
    TOPOLOGY_METRICS,
    TopologyProfile,
    correlate_topology,
    profile,
    profiles_to_csv,
    regressions_to_csv,
    scatter_points,
    scatter_to_csv,
)

log = logging.getLogger(__name__)

WORKERS_ENV = "KGBPR_WORKERS"

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2, 3

_HP_FIELDS = {f.name: f.type for f in dataclasses.fields(HyperParams)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    input_path: str
    output_dir: str
    predicates: tuple[str, ...] | str = "all"
    methods: tuple[str, ...] = METHODS
    hyperparams: dict = field(default_factory=dict)
    repeat_count: int = 5
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        hp = dict(self.hyperparams)
        hp.setdefault("default", HyperParams())
        object.__setattr__(self, "hyperparams", hp)

    def validate(self):
        if not self.methods:
            raise ConfigError("methods must not be empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s) {unknown}; expected a subset of {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate method in methods")
        if int(self.repeat_count) < 1:
            raise ConfigError(f"repeat_count must be >= 1, got {self.repeat_count}")
        if int(self.workers) < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        bad = [k for k in self.hyperparams if k != "default" and k not in METHODS]
        if bad:
            raise ConfigError(f"hyperparams given for unknown method(s) {bad}")
        return self

    def hp_for(self, method: str) -> HyperParams:
        return self.hyperparams.get(method, self.hyperparams["default"])

    def to_dict(self):
        return {
            "input_path": str(self.input_path),
            "output_dir": str(self.output_dir),
            "predicates": self.predicates if isinstance(self.predicates, str) else list(self.predicates),
            "methods": list(self.methods),
            "repeat_count": int(self.repeat_count),
            "seed": int(self.seed),
            "workers": int(self.workers),
            "hyperparams": {m: self.hp_for(m).to_dict() for m in self.methods},
        }


def _parse_hp(section, base: HyperParams) -> HyperParams:
    values = {}
    for key, raw in section.items():
        if key not in _HP_FIELDS or key == "seed":
            raise ConfigError(f"unknown hyperparameter {key!r}")
        try:
            values[key] = int(raw) if key in ("K", "epochs", "top_n") else float(raw)
        except ValueError:
            raise ConfigError(f"hyperparameter {key} = {raw!r} is not a number") from None
    try:
        return dataclasses.replace(base, **values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _split_list(raw: str) -> list[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read an INI config and apply flag overrides (``None`` values are ignored)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";",))
    parser.optionxform = str
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file {path} not found")
        parser.read(path, encoding="utf-8")
    exp = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    unknown = set(exp) - {"input", "predicates", "methods", "repeats", "seed", "output", "workers"}
    if unknown:
        raise ConfigError(f"unknown [experiment] key(s) {sorted(unknown)}")
    for key, value in (overrides or {}).items():
        if value is not None:
            exp[key] = value if isinstance(value, str) else ",".join(value) if isinstance(value, (list, tuple)) else str(value)

    base = _parse_hp(parser["hyperparams"], HyperParams()) if parser.has_section("hyperparams") else HyperParams()
    hps = {"default": base}
    for name in parser.sections():
        if name.startswith("hyperparams."):
            hps[name.split(".", 1)[1]] = _parse_hp(parser[name], base)
        elif name not in ("experiment", "hyperparams"):
            raise ConfigError(f"unknown config section [{name}]")

    if "input" not in exp:
        raise ConfigError("no input file given")
    if "output" not in exp:
        raise ConfigError("no output directory given")
    preds = exp.get("predicates", "all").strip()
    workers = exp.get("workers") or os.environ.get(WORKERS_ENV) or "1"
    try:
        cfg = ExperimentConfig(
            input_path=exp["input"],
            output_dir=exp["output"],
            predicates="all" if preds == "all" else tuple(_split_list(preds)),
            methods=tuple(_split_list(exp.get("methods", ",".join(METHODS)))),
            hyperparams=hps,
            repeat_count=int(exp.get("repeats", 5)),
            seed=int(exp.get("seed", 0)),
            workers=int(workers),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


@dataclass
class PredicateResult:
    predicate: str
    profile: TopologyProfile | None = None
    reports: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    error: str | None = None


def run_predicate(predicate: str, pairs, cfg: ExperimentConfig) -> PredicateResult:
    """Split, train and evaluate every configured method on one predicate."""
    res = PredicateResult(predicate)
    try:
        g = graph_from_pairs(predicate, pairs)
        res.profile = profile(g)
        split_seed = seeding.derive_seed(cfg.seed, predicate, "split")
        res.seeds["split"] = split_seed
        split = make_split(g, cfg.repeat_count, split_seed)
        for method in cfg.methods:
            hp = dataclasses.replace(cfg.hp_for(method), seed=seeding.derive_seed(cfg.seed, predicate, method))
            res.seeds[method] = hp.seed
            t0 = time.perf_counter()
            res.reports[method] = evaluate(method, g, split, hp)
            res.seconds[method] = time.perf_counter() - t0
    except Exception as exc:
        log.error("predicate %s failed: %s", predicate, exc)
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def write_analysis(out: Path, profiles, reports_by_method: dict) -> dict:
    """Topology CSV plus, per method, the regression grid and scatter files."""
    _write(out / "topology.csv", profiles_to_csv(profiles))
    notes = {}
    for method, reports in reports_by_method.items():
        if len(profiles) < 2:
            notes[method] = "regression skipped: fewer than 2 predicates"
            continue
        grid = correlate_topology(profiles, reports, strict=False)
        _write(out / f"regression_{method}.csv", regressions_to_csv(grid))
        for xm in TOPOLOGY_METRICS:
            for ym in PERFORMANCE_METRICS:
                pts = scatter_points(profiles, reports, xm, ym)
                _write(out / "scatter" / method / f"{xm}__{ym}.csv", scatter_to_csv(pts))
        undefined = [f"{ym}~{xm}" for (xm, ym), fit in grid.items() if not np.isfinite(fit.rvalue)]
        if undefined:
            notes[method] = "undefined (zero x variance): " + ", ".join(undefined)
    return notes


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every (predicate, method) cell and write all artifacts to ``cfg.output_dir``.

    Returns an exit status: 0 success, 1 every predicate failed, 2 invalid
    config, 3 some predicates failed.
    """
    started = time.perf_counter()
    try:
        cfg.validate()
        kg = read_triples(cfg.input_path)
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    available = sorted(kg.predicates)
    if cfg.predicates == "all":
        predicates = available
    else:
        missing = [p for p in cfg.predicates if p not in kg.predicates]
        if missing:
            log.error("unknown predicate(s) %s; available: %s", missing, ", ".join(available))
            return EXIT_CONFIG
        predicates = sorted(set(cfg.predicates))
    if not predicates:
        log.error("input contains no triples")
        return EXIT_FAILED

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(p, kg.pairs(p), cfg) for p in predicates]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_predicate, *zip(*jobs)))
    else:
        results = [run_predicate(*job) for job in jobs]

    ok = [r for r in results if r.error is None]
    failed = {r.predicate: r.error for r in results if r.error is not None}
    reports = [r.reports[m] for r in ok for m in cfg.methods]
    _write(out / "eval.csv", reports_to_csv(reports))
    profiles = [r.profile for r in ok]
    notes = write_analysis(out, profiles, {m: [r.reports[m] for r in ok] for m in cfg.methods})
    _write(out / "config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")

    config_blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    manifest = {
        "kgbpr_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": int(cfg.seed),
        "config_sha256": hashlib.sha256(config_blob).hexdigest(),
        "input_sha256": _sha256(cfg.input_path),
        "parse": dataclasses.asdict(kg.stats) | {"malformed_lines": list(kg.stats.malformed_lines[:100])},
        "predicates": {
            r.predicate: {"seeds": r.seeds, "seconds": r.seconds, "error": r.error} for r in results
        },
        "analysis_notes": notes,
        "failed": failed,
        "wall_seconds": time.perf_counter() - started,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    if not ok:
        return EXIT_FAILED
    return EXIT_PARTIAL if failed else EXIT_OK


REQUIRED_ARTIFACTS = ("eval.csv", "topology.csv")


def _table(header, rows) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(x).ljust(w) for x, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths])] + [line(r) for r in rows])


def report_summary(output_dir) -> str:
    """Per-predicate method x metric grid of means, then each method's regression grid."""
    out = Path(output_dir)
    missing = [name for name in REQUIRED_ARTIFACTS if not (out / name).exists()]
    if missing:
        raise FileNotFoundError(f"missing artifact(s) in {out}: {', '.join(missing)}")
    reports = reports_from_csv((out / "eval.csv").read_text(encoding="utf-8"))
    parts = []
    by_pred: dict[str, list[EvalReport]] = {}
    for r in reports:
        by_pred.setdefault(r.predicate, []).append(r)
    for pred in sorted(by_pred):
        rows = [(r.method, f"{r.hr:.4f}", f"{r.arhr:.4f}", f"{r.auc:.4f}", r.n_subjects_tested) for r in by_pred[pred]]
        parts.append(f"== {pred}\n" + _table(("method", "hr", "arhr", "auc", "subjects"), rows))
    for reg in sorted(out.glob("regression_*.csv")):
        method = reg.stem.split("_", 1)[1]
        rows = [
            (r["x_metric"], r["y_metric"], _num(r["slope"]), _num(r["intercept"]), _num(r["rvalue"]), r["n_points"])
            for r in csv.DictReader(io.StringIO(reg.read_text(encoding="utf-8")))
        ]
        parts.append(f"== regression ({method})\n" + _table(("x_metric", "y_metric", "slope", "intercept", "rvalue", "n_points"), rows))
    return "\n\n".join(parts) + "\n"


def _num(raw: str) -> str:
    return f"{float(raw):.4f}"

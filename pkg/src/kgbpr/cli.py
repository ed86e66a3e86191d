"""Command line entry point: ``kgbpr <subcommand>``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from kgbpr import pipeline
from kgbpr.baselines import pointwise_mf_train
from kgbpr.bpr import train
from kgbpr.evaluation import METHODS, evaluate, make_split, reports_from_csv, reports_to_csv
from kgbpr.model import HyperParams
from kgbpr.store import TripleFormatError, UnknownPredicateError, extract_bipartite, read_triples, subgraph_stats
from kgbpr.synth import KINDS, SyntheticSpec, SynthError, generate_synthetic
from kgbpr.topology import profile

log = logging.getLogger("kgbpr")


def _add_hp(p):
    d = HyperParams()
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--K", type=int, default=None, help=f"latent dimension (default {d.K})")
    g.add_argument("--alpha", type=float, default=None, help=f"learning rate (default {d.alpha})")
    g.add_argument("--lambda", dest="lam", type=float, default=None, help=f"all three L2 weights (default {d.lambda_s})")
    g.add_argument("--epochs", type=int, default=None, help=f"samples per edge (default {d.epochs})")
    g.add_argument("--top-n", type=int, default=None, help=f"list length N (default {d.top_n})")


def _hp(args, seed=0) -> HyperParams:
    values = {"seed": seed}
    for name in ("K", "alpha", "epochs"):
        if getattr(args, name) is not None:
            values[name] = getattr(args, name)
    if args.top_n is not None:
        values["top_n"] = args.top_n
    if args.lam is not None:
        values.update(lambda_s=args.lam, lambda_o_pos=args.lam, lambda_o_neg=args.lam)
    return HyperParams(**values)


def cmd_ingest(args):
    kg = read_triples(args.input)
    st = kg.stats
    print(f"parsed={st.parsed} distinct={len(kg)} duplicates={st.duplicates} malformed={st.malformed}")
    print("predicate\tsubjects\tobjects\tedges")
    for p in sorted(kg.predicates):
        m, n, e = subgraph_stats(extract_bipartite(kg, p))
        print(f"{p}\t{m}\t{n}\t{e}")
    return 0


def cmd_train(args):
    kg = read_triples(args.input)
    g = extract_bipartite(kg, args.predicate)
    hp = _hp(args, args.seed)
    if args.method == "bpr":
        model, report = train(g, hp)
        print(f"samples={report.samples_processed} objective={report.final_objective:.6f}")
    else:
        model = pointwise_mf_train(g, hp)
    out = Path(args.out)
    model.save(out)
    labels = {"predicate": g.predicate, "subjects": list(g.subjects), "objects": list(g.objects), "hyperparams": hp.to_dict()}
    Path(str(out) + ".labels.json").write_text(json.dumps(labels) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_evaluate(args):
    kg = read_triples(args.input)
    g = extract_bipartite(kg, args.predicate)
    split = make_split(g, args.repeats, args.seed)
    reports = [evaluate(m, g, split, _hp(args, args.seed)) for m in args.methods]
    text = reports_to_csv(reports)
    if args.csv:
        Path(args.csv).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_analyze(args):
    kg = read_triples(args.input)
    profiles = [profile(extract_bipartite(kg, p)) for p in sorted(kg.predicates)]
    out = Path(args.output)
    by_method = {}
    if args.eval:
        for r in reports_from_csv(Path(args.eval).read_text()):
            by_method.setdefault(r.method, []).append(r)
        names = {p.predicate for p in profiles}
        for reps in by_method.values():
            names &= {r.predicate for r in reps}
        profiles = [p for p in profiles if p.predicate in names]
        by_method = {m: [r for r in reps if r.predicate in names] for m, reps in by_method.items()}
    notes = pipeline.write_analysis(out, profiles, by_method)
    for method, note in notes.items():
        print(f"{method}: {note}")
    print(f"wrote analysis to {out}")
    return 0


def cmd_run(args):
    overrides = {
        "input": args.input,
        "output": args.output,
        "predicates": args.predicates,
        "methods": args.methods,
        "repeats": args.repeats,
        "seed": args.seed,
        "workers": args.workers,
    }
    try:
        cfg = pipeline.load_config(args.config, overrides)
        hp_over = {k: v for k, v in dataclasses.asdict(_hp(args)).items() if k != "seed"}
        explicit = {k: v for k, v in hp_over.items() if v != getattr(HyperParams(), k)}
        if explicit:
            hps = {m: dataclasses.replace(h, **explicit) for m, h in cfg.hyperparams.items()}
            cfg = dataclasses.replace(cfg, hyperparams=hps).validate()
    except pipeline.ConfigError as exc:
        log.error("invalid config: %s", exc)
        return pipeline.EXIT_CONFIG
    status = pipeline.run_experiment(cfg)
    if status in (pipeline.EXIT_OK, pipeline.EXIT_PARTIAL):
        print(pipeline.report_summary(cfg.output_dir), end="")
    return status


def cmd_synth(args):
    params = {}
    for item in args.param or []:
        key, _, raw = item.partition("=")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    path = generate_synthetic(SyntheticSpec(args.kind, params, args.seed), args.out)
    print(f"wrote {path}")
    return 0


def cmd_report(args):
    print(pipeline.report_summary(args.output_dir), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgbpr", description="Per-predicate BPR link prediction for knowledge graphs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a triple file and print per-predicate statistics")
    p.add_argument("input")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train one predicate's model and dump it")
    p.add_argument("input")
    p.add_argument("--predicate", required=True)
    p.add_argument("--method", choices=("bpr", "mf"), default="bpr")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_hp(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="leave-one-out evaluation of one predicate")
    p.add_argument("input")
    p.add_argument("--predicate", required=True)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    _add_hp(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="topology metrics and regressions against an eval CSV")
    p.add_argument("input")
    p.add_argument("--eval", help="eval.csv from a previous run")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="full pipeline from a config file and/or flags")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--predicates", nargs="+")
    p.add_argument("--methods", nargs="+")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help=f"parallel predicates (env {pipeline.WORKERS_ENV})")
    _add_hp(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate a synthetic triple file")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter (JSON value)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("output_dir")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UnknownPredicateError, TripleFormatError, SynthError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return pipeline.EXIT_CONFIG if isinstance(exc, (SynthError, pipeline.ConfigError)) else pipeline.EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

"""Command line interface.

    ddssp gen-synth --task linear --out synth/
    ddssp marginals --data synth/data.csv --domain synth/domain.json --mechanism aimlite --epsilon 1 --out m.json
    ddssp fit --marginals m.json --encoding synth/encoding.json --out model.json
    ddssp bench --config bench.json --out results.csv
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .bench.harness import METHODS, ExperimentConfig, emit, fit_method, run_experiment
from .bench.synth import write_synthetic
from .dataset import Domain, load_csv
from .encoding import EncodingSpec, default_spec
from .mechanism import MECHANISMS, MechanismOutput, release
from .privacy import PrivacyBudget
from .ssp import fit_from_marginals

log = logging.getLogger("ddssp")


def _budget(args) -> PrivacyBudget:
    return PrivacyBudget(args.epsilon, args.delta)


def _load_spec(path, target, task, domain):
    if path:
        with open(path) as fh:
            obj = json.load(fh)
        if task:
            obj["task"] = task
        return EncodingSpec.from_json(obj, domain)
    if not target:
        raise SystemExit("either --encoding or --target is required")
    return default_spec(domain, target, task or "linear")


def _default_methods(task: str) -> list[str]:
    return ["ddssp-aimlite", "ddssp-gaussian", "adassp" if task == "linear" else "objpert", "nonprivate"]


def cmd_gen_synth(args):
    paths = write_synthetic(args.out, n=args.n, task=args.task, seed=args.seed)
    cfg = {
        "data": paths["data"].name,
        "domain": paths["domain"].name,
        "encoding": paths["encoding"].name,
        "task": args.task,
        "methods": _default_methods(args.task),
    }
    with open(paths["data"].parent / "bench.json", "w") as fh:
        json.dump(cfg, fh, indent=2)
    print(f"wrote {', '.join(str(p) for p in paths.values())} and bench.json")


def cmd_marginals(args):
    domain = Domain.load(args.domain)
    data = load_csv(args.data, domain, strict=not args.lenient)
    budget = None if args.mechanism == "exact" else _budget(args)
    out = release(args.mechanism, data, budget, np.random.default_rng(args.seed))
    out.save(args.out)
    print(f"{out.mechanism}: released {len(out.tables)} tables, n_hat={out.n_hat:.1f}, "
          f"rho spent {out.ledger.rho_spent:.6g} of {out.ledger.rho_total:.6g} -> {args.out}")


def cmd_fit(args):
    if args.marginals:
        out = MechanismOutput.load(args.marginals)
        spec = _load_spec(args.encoding, args.target, args.task, out.domain)
        model = fit_from_marginals(out, spec, intercept=not args.no_intercept)
    else:
        if not (args.data and args.domain):
            raise SystemExit("fit needs --marginals, or --data and --domain")
        domain = Domain.load(args.domain)
        data = load_csv(args.data, domain, strict=not args.lenient)
        spec = _load_spec(args.encoding, args.target, args.task, domain)
        method = args.method or "nonprivate"
        model, _ = fit_method(method, data, spec, _budget(args), np.random.default_rng(args.seed), not args.no_intercept)
    model.save(args.out)
    print(f"{model.provenance} {model.task} model with {len(model.theta)} coefficients -> {args.out}")


def cmd_bench(args):
    if args.config:
        base = vars(ExperimentConfig.load(args.config))
    else:
        base = {"data": args.data, "domain": args.domain, "encoding": args.encoding, "target": args.target}
    overrides = {
        "epsilons": args.epsilon,
        "delta": args.delta,
        "trials": args.trials,
        "seed": args.seed,
        "workers": args.workers,
        "task": args.task,
        "methods": args.methods,
    }
    merged = {**base, **{k: v for k, v in overrides.items() if v is not None}}
    if "methods" not in merged:
        merged["methods"] = _default_methods(merged.get("task", "linear"))
    cfg = ExperimentConfig(**merged)
    rows = run_experiment(cfg)
    emit(rows, args.format, args.out)
    print(f"{len(rows)} result rows -> {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ddssp", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synth", help="write the canned synthetic benchmark")
    g.add_argument("--task", choices=["linear", "logistic"], default="linear")
    g.add_argument("--n", type=int, default=20_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_synth)

    m = sub.add_parser("marginals", help="privately release all pairwise marginals")
    m.add_argument("--data", required=True)
    m.add_argument("--domain", required=True)
    m.add_argument("--mechanism", choices=sorted(MECHANISMS), default="aimlite")
    m.add_argument("--epsilon", type=float, default=1.0)
    m.add_argument("--delta", type=float, default=1e-5)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--lenient", action="store_true", help="drop bad rows instead of failing")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_marginals)

    f = sub.add_parser("fit", help="fit a model from released marginals or from raw data")
    f.add_argument("--marginals", help="mechanism output JSON (post-processing only)")
    f.add_argument("--data")
    f.add_argument("--domain")
    f.add_argument("--encoding")
    f.add_argument("--target", help="target attribute when no encoding file is given")
    f.add_argument("--task", choices=["linear", "logistic"])
    f.add_argument("--method", choices=["adassp", "objpert", "nonprivate"], help="baseline to fit on raw data")
    f.add_argument("--epsilon", type=float, default=1.0)
    f.add_argument("--delta", type=float, default=1e-5)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--no-intercept", action="store_true")
    f.add_argument("--lenient", action="store_true")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bench", help="run an epsilon sweep")
    b.add_argument("--config", help="JSON experiment config; flags override it")
    b.add_argument("--data")
    b.add_argument("--domain")
    b.add_argument("--encoding")
    b.add_argument("--target")
    b.add_argument("--task", choices=["linear", "logistic"])
    b.add_argument("--methods", nargs="+", choices=METHODS)
    b.add_argument("--epsilon", type=float, nargs="+")
    b.add_argument("--delta", type=float)
    b.add_argument("--trials", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--workers", type=int)
    b.add_argument("--format", choices=["csv", "json"], default="csv")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0

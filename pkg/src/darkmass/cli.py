"""Command line entry point: ``darkmass run | synth | summarize``."""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .binning import bin_catalog
from .catalog import write_catalog
from .model import extend_grid
from .synthetic import AnalyticModel, sample_catalog, truth_tables


def _cmd_run(args):
    try:
        cfg = pipeline.load_config(args.config)
    except (OSError, pipeline.ConfigError) as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return pipeline.EXIT_USAGE
    for item in args.set or []:
        try:
            override = pipeline.parse_config(item)
        except pipeline.ConfigError as exc:
            print(f"[config] --set {item!r}: {exc}", file=sys.stderr)
            return pipeline.EXIT_USAGE
        key = item.split("=", 1)[0].strip()
        setattr(cfg, key, getattr(override, key))
    return pipeline.run_pipeline(cfg)


def _cmd_synth(args):
    if args.n < 1:
        print("[synth] --n must be >= 1", file=sys.stderr)
        return pipeline.EXIT_USAGE
    G = pipeline.UNITS[args.units]["G"]
    model = AnalyticModel(args.model, args.mass, args.scale, G)
    rng = np.random.default_rng(args.seed)
    try:
        data, _ = sample_catalog(rng, model, args.n, sigma_v3=args.sigma_v3, r_max=args.r_max)
    except NotImplementedError as exc:
        print(f"[synth] {exc}", file=sys.stderr)
        return pipeline.EXIT_USAGE
    write_catalog(data, args.out)
    if args.truth:
        b = bin_catalog(data, G, raw_counts=args.raw_counts, safety=args.safety)
        region = extend_grid(b.rgrid, args.los_extra).r_max
        t = truth_tables(model, b.rgrid, b.egrid, r_max=args.r_max, r_region=region)
        out = {k: [float(x) for x in v] for k, v in t.items()}
        out.update(model=args.model, mass=args.mass, scale=args.scale, G=G, seed=args.seed,
                   r_max=args.r_max, safety=args.safety, los_extra=args.los_extra)
        Path(args.truth).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(data)} tracers to {args.out}", file=sys.stderr)
    return pipeline.EXIT_OK


def _cmd_summarize(args):
    try:
        summary = pipeline.summarize_dir(args.chains)
    except (OSError, ValueError, KeyError) as exc:
        print(f"[summary] {exc}", file=sys.stderr)
        return pipeline.EXIT_FAILED
    for w in summary["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {Path(args.chains) / 'summary.json'}", file=sys.stderr)
    return pipeline.EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="darkmass", description="Bayesian mass-density inference from tracer kinematics")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="bin a catalog, run the chains and write summaries")
    run.add_argument("--config", required=True, help="flat key = value config file")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    run.set_defaults(func=_cmd_run)

    syn = sub.add_parser("synth", help="write a mock catalog drawn from an analytic model")
    syn.add_argument("--model", default="plummer", choices=["plummer", "uniform"])
    syn.add_argument("--n", type=int, default=255)
    syn.add_argument("--out", required=True)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--mass", type=float, default=1.0)
    syn.add_argument("--scale", type=float, default=1.0, help="Plummer a or uniform-sphere R")
    syn.add_argument("--units", default="code", choices=sorted(pipeline.UNITS))
    syn.add_argument("--r-max", type=float, default=None, help="keep only orbits confined inside this radius")
    syn.add_argument("--sigma-v3", type=float, default=None, help="Gaussian v3 noise, recorded in the catalog")
    syn.add_argument("--truth", default=None, help="also write binned truth tables (JSON)")
    syn.add_argument("--safety", type=float, default=1.1, help="binning safety factor used for the truth grids")
    syn.add_argument("--raw-counts", action="store_true")
    syn.add_argument("--los-extra", type=float, default=1.0)
    syn.set_defaults(func=_cmd_synth)

    summ = sub.add_parser("summarize", help="recompute summary.json and figures from chain files")
    summ.add_argument("--chains", required=True, help="run output directory")
    summ.set_defaults(func=_cmd_summarize)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``bench {run,gen,emst,kcenters,tsp,phi}``.

Exit codes: 0 success, 2 configuration or usage error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..difficulty import PHI2_RULES, batch_phi
from ..geoproblems import emst_boruvka, farthest_first, greedy_tsp
from ..metricspace import DimensionMismatch, DomainError, EmptyDatasetError, Metric
from ..spatialtree import SPLIT_KINDS, SplitRule, TreeConfig
from .data import DataError, format_csv, generate, ingest_csv, write_csv
from .experiment import ConfigError, load_config, run_experiment, rows_to_csv, write_results

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _metric(text: str) -> Metric:
    try:
        return Metric.parse(text)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _params(pairs: list[str]) -> dict:
    out = {}
    for p in pairs:
        if "=" not in p:
            raise ConfigError(f"generator parameter {p!r} is not key=value")
        k, v = p.split("=", 1)
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                raise ConfigError(f"generator parameter {k} must be numeric") from None
    return out


def _emit(doc: dict, out) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.metric is not None:
        cfg.metric = args.metric
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    rows = run_experiment(cfg)
    if cfg.out:
        csv_path, json_path = write_results(rows, cfg, cfg.out)
        print(f"wrote {csv_path} and {json_path}")
    else:
        sys.stdout.write(rows_to_csv(rows, cfg.timing))
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        X = generate(args.name, _params(args.params), args.seed)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if args.out:
        write_csv(args.out, X)
    else:
        sys.stdout.write(format_csv(X))
    return EXIT_OK


def _tree_config(args) -> TreeConfig:
    return TreeConfig(SplitRule(args.split), max_leaf_size=args.leaf_size, rng_seed=args.seed or 0)


def cmd_emst(args) -> int:
    X = ingest_csv(args.file, args.has_label)
    res = emst_boruvka(X, _metric(args.metric), _tree_config(args))
    _emit({"n": len(X), "total_weight": res.total_weight, "rounds": res.rounds,
           "cnns_queries": res.cnns_queries, "recolor_events": res.recolor_events,
           "edges": [[u, v, w] for u, v, w in res.edges]}, args.out)
    return EXIT_OK


def cmd_kcenters(args) -> int:
    X = ingest_csv(args.file, args.has_label)
    try:
        res = farthest_first(X, _metric(args.metric), args.k, args.start)
    except (ValueError, IndexError) as e:
        raise ConfigError(str(e)) from None
    _emit({"k": args.k, "centers": res.centers, "cost": res.cost}, args.out)
    return EXIT_OK


def cmd_tsp(args) -> int:
    X = ingest_csv(args.file, args.has_label)
    if not 0 <= args.start < len(X):
        raise ConfigError("start index out of range")
    tour, length = greedy_tsp(X, _metric(args.metric), args.start)
    _emit({"tour": tour, "length": length}, args.out)
    return EXIT_OK


def cmd_phi(args) -> int:
    Q = ingest_csv(args.queries, args.has_label)
    X = ingest_csv(args.refs, args.has_label)
    try:
        rep = batch_phi(Q, X, _metric(args.metric), args.k, args.m, args.phi2_rule)
    except (DimensionMismatch, DomainError, EmptyDatasetError) as e:
        raise DataError(str(e)) from None
    except ValueError as e:
        raise ConfigError(str(e)) from None
    _emit({"phi1": rep.phi1, "phi2": rep.phi2, "phi2_rule": rep.phi2_rule, "product": rep.product,
           "log_bound": rep.log_bound, "k": rep.k, "m": rep.m}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--metric", default=None, help="euclidean | kl | minkowski:p")
    common.add_argument("--out", "-o", default=None, help="output path")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--has-label", action="store_true", help="last CSV column is an integer label")

    tree = argparse.ArgumentParser(add_help=False)
    tree.add_argument("--split", choices=SPLIT_KINDS, default="kd")
    tree.add_argument("--leaf-size", type=int, default=8)

    ap = argparse.ArgumentParser(prog="bench", description="Spatial-tree benchmarks and proximity tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", parents=[common], help="write a synthetic dataset as CSV")
    p.add_argument("name")
    p.add_argument("params", nargs="*", help="key=value generator parameters")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("emst", parents=[common, data, tree], help="Euclidean minimum spanning tree")
    p.add_argument("file")
    p.set_defaults(func=cmd_emst)

    p = sub.add_parser("kcenters", parents=[common, data], help="farthest-first k-center")
    p.add_argument("file")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--start", type=int, default=0)
    p.set_defaults(func=cmd_kcenters)

    p = sub.add_parser("tsp", parents=[common, data], help="greedy nearest-neighbor tour")
    p.add_argument("file")
    p.add_argument("--start", type=int, default=0)
    p.set_defaults(func=cmd_tsp)

    p = sub.add_parser("phi", parents=[common, data], help="batch difficulty potential")
    p.add_argument("queries")
    p.add_argument("refs")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--phi2-rule", choices=PHI2_RULES, default="mean_interpoint")
    p.set_defaults(func=cmd_phi)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command != "run":
        args.metric = args.metric or "euclidean"
        args.seed = 0 if args.seed is None else args.seed
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DimensionMismatch, DomainError, EmptyDatasetError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Recall-versus-comparisons sweeps over spatial-tree variants.

A run builds one tree per (split kind, spill, leaf size), asks every query
point for its neighbors with defeatist search (leaving the query itself
out) and scores the answers against a brute-force scan.
"""
from __future__ import annotations

import csv
import io
import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..lsh import FAMILIES, LshParams, lsh_build, lsh_query
from ..metricspace import EUCLIDEAN, Metric
from ..spatialtree import SPILL_MODES, SPLIT_KINDS, SplitRule, TreeConfig, build_tree, defeatist_nns
from .data import GENERATORS, DataError, generate, ingest_csv, jl_project
from .metrics import rank_ratio, recall_at_k, true_ranks

BENCH_FORMAT = "benchfmt/1"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    dataset: Optional[str] = None
    data_file: Optional[str] = None
    has_label: bool = False
    gen_params: dict = field(default_factory=dict)
    metric: str = "euclidean"
    trees: list = field(default_factory=lambda: list(SPLIT_KINDS))
    spills: list = field(default_factory=lambda: [0.0, 0.05, 0.1])
    spill_mode: str = "duplicate"
    leaf_sizes: list = field(default_factory=lambda: [8])
    k_rank: int = 2
    k_class: int = 10
    queries: int = 50
    seed: int = 0
    jl_dim: Optional[int] = None
    lsh: bool = False
    lsh_params: dict = field(default_factory=dict)
    out: Optional[str] = None
    timing: bool = False

    def validate(self) -> None:
        if (self.dataset is None) == (self.data_file is None):
            raise ConfigError("give exactly one of dataset= or data_file=")
        if self.dataset is not None and self.dataset not in GENERATORS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; expected one of {GENERATORS}")
        try:
            m = Metric.parse(self.metric)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not m.is_true_metric:
            raise ConfigError(f"metric {self.metric!r} is not a metric; trees need the triangle inequality")
        bad = [t for t in self.trees if t not in SPLIT_KINDS]
        if bad or not self.trees:
            raise ConfigError(f"trees must be a nonempty subset of {SPLIT_KINDS}")
        if not self.spills or any(not 0.0 <= s < 0.5 for s in self.spills):
            raise ConfigError("spill values must lie in [0, 0.5)")
        if self.spill_mode not in SPILL_MODES:
            raise ConfigError(f"spill_mode must be one of {SPILL_MODES}")
        if not self.leaf_sizes or any(s < 1 for s in self.leaf_sizes):
            raise ConfigError("leaf sizes must be >= 1")
        if self.k_rank < 1 or self.k_class < 1 or self.queries < 1:
            raise ConfigError("k_rank, k_class and queries must be >= 1")
        if self.jl_dim is not None and self.jl_dim < 1:
            raise ConfigError("jl_dim must be >= 1")
        if self.lsh:
            if m != EUCLIDEAN:
                raise ConfigError("the LSH row needs the euclidean metric")
            try:
                self.lsh_param_object()
            except (TypeError, ValueError) as e:
                raise ConfigError(f"lsh: {e}") from None

    def lsh_param_object(self) -> LshParams:
        p = dict(self.lsh_params)
        p.setdefault("seed", self.seed)
        if "family" in p and p["family"] not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        return LshParams(**p)


@dataclass
class ResultRow:
    tree: str
    spill: float
    leaf_size: int
    queries: int
    comparisons: float
    rank_ratio: Optional[float]
    recall_at_k: float
    classification_error: Optional[float]
    wall_time: Optional[float] = None


def _split_list(v: str) -> list[str]:
    return [x.strip() for x in v.split(",") if x.strip()]


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _number(v: str):
    try:
        return int(v)
    except ValueError:
        return float(v)


LSH_KEYS = {"family": str, "k": int, "L": int, "R": float, "c": float, "bucket_width": float, "seed": int}


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("gen."):
                cfg.gen_params[key[4:]] = _number(value)
            elif key.startswith("lsh."):
                sub = key[4:]
                if sub not in LSH_KEYS:
                    raise ValueError(f"unknown lsh key {sub!r}")
                cfg.lsh_params[sub] = LSH_KEYS[sub](value)
            elif key in ("dataset", "data_file", "metric", "spill_mode", "out"):
                setattr(cfg, key, value)
            elif key in ("has_label", "lsh", "timing"):
                setattr(cfg, key, _bool(value))
            elif key == "trees":
                cfg.trees = _split_list(value)
            elif key == "spills":
                cfg.spills = [float(s) for s in _split_list(value)]
            elif key == "leaf_sizes":
                cfg.leaf_sizes = [int(s) for s in _split_list(value)]
            elif key in ("k_rank", "k_class", "queries", "seed", "jl_dim"):
                setattr(cfg, key, int(value))
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as e:
            raise ConfigError(f"line {lineno}: {e}") from None
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return parse_config(text)


def load_dataset(cfg: ExperimentConfig):
    if cfg.data_file is not None:
        try:
            return ingest_csv(cfg.data_file, cfg.has_label)
        except OSError as e:
            raise DataError(f"cannot read {cfg.data_file}: {e}") from None
    try:
        return generate(cfg.dataset, cfg.gen_params, cfg.seed)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"dataset parameters: {e}") from None


def _vote(labels: np.ndarray, idx: list[int]) -> Optional[int]:
    if not idx:
        return None
    counts = Counter(int(labels[i]) for i in idx)
    top = max(counts.values())
    return min(lab for lab, c in counts.items() if c == top)


def _score(answers, ranks, labels, cfg: ExperimentConfig):
    ratios, recalls, wrong, comps = [], [], 0, 0
    for qi, (returned, n_comp) in answers.items():
        comps += n_comp
        top = returned[: cfg.k_rank]
        if top:
            ratios.append(rank_ratio(ranks[qi], top))
        recalls.append(recall_at_k(ranks[qi], top, cfg.k_rank))
        if labels is not None:
            wrong += _vote(labels, returned[: cfg.k_class]) != int(labels[qi])
    n = len(answers)
    return (
        comps / n,
        float(np.mean(ratios)) if ratios else None,
        float(np.mean(recalls)),
        wrong / n if labels is not None else None,
    )


def run_experiment(cfg: ExperimentConfig, X=None) -> list[ResultRow]:
    """Run every configured tree variant (plus an optional LSH row) and return the rows."""
    cfg.validate()
    X = load_dataset(cfg) if X is None else X
    n = len(X)
    metric = Metric.parse(cfg.metric)
    rng = np.random.default_rng(cfg.seed)
    queries = np.arange(n) if cfg.queries >= n else np.sort(rng.choice(n, cfg.queries, replace=False))

    Y = X
    if cfg.jl_dim is not None:
        if cfg.jl_dim > X.dim:
            raise ConfigError(f"jl_dim {cfg.jl_dim} exceeds the data dimension {X.dim}")
        Y, _ = jl_project(X, cfg.jl_dim, cfg.seed)

    # oracle ranks in the original space, leaving the query out
    ranks = {int(i): true_ranks(X.points[i], X, metric, exclude=[int(i)]) for i in queries}
    k_search = max(cfg.k_rank, cfg.k_class) + 1
    rows: list[ResultRow] = []
    for kind in cfg.trees:
        for spill in cfg.spills:
            for leaf in cfg.leaf_sizes:
                t0 = time.perf_counter()
                tcfg = TreeConfig(SplitRule(kind), spill, leaf, cfg.spill_mode, cfg.seed)
                tree = build_tree(Y, metric, tcfg)
                answers = {}
                for i in queries.tolist():
                    rep = defeatist_nns(tree, Y.points[i], k_search)
                    answers[i] = ([j for j, _ in rep.result if j != i], rep.comparisons)
                comp, rr, rec, err = _score(answers, ranks, X.labels, cfg)
                wall = time.perf_counter() - t0 if cfg.timing else None
                rows.append(ResultRow(kind, float(spill), int(leaf), len(queries), comp, rr, rec, err, wall))
    if cfg.lsh:
        t0 = time.perf_counter()
        index = lsh_build(Y, cfg.lsh_param_object())
        answers = {}
        for i in queries.tolist():
            rep = lsh_query(index, Y.points[i], exclude=[i])
            answers[i] = ([j for j, _ in rep.result], rep.comparisons)
        comp, rr, rec, err = _score(answers, ranks, X.labels, cfg)
        wall = time.perf_counter() - t0 if cfg.timing else None
        rows.append(ResultRow("lsh", 0.0, 0, len(queries), comp, rr, rec, err, wall))
    return rows


CSV_COLUMNS = ("tree", "spill", "leaf_size", "queries", "comparisons", "rank_ratio",
               "recall_at_k", "classification_error")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[ResultRow], timing: bool = False) -> str:
    cols = CSV_COLUMNS + (("wall_time",) if timing else ())
    buf = io.StringIO()
    buf.write(f"# {BENCH_FORMAT}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        d = asdict(r)
        w.writerow([_cell(d[c]) for c in cols])
    return buf.getvalue()


def rows_to_json(rows: list[ResultRow], cfg: ExperimentConfig) -> str:
    records = []
    for r in rows:
        d = asdict(r)
        if not cfg.timing:
            d.pop("wall_time")
        records.append(d)
    # the output path is not part of the experiment, so reruns elsewhere compare equal
    config = {k: v for k, v in asdict(cfg).items() if k != "out"}
    doc = {"format": BENCH_FORMAT, "config": config, "spill_units": "fraction", "rows": records}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_results(rows: list[ResultRow], cfg: ExperimentConfig, out) -> tuple[Path, Path]:
    """Write ``<out>.csv`` and ``<out>.json``."""
    base = Path(out)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_name(base.name + ".csv"), base.with_name(base.name + ".json")
    csv_path.write_text(rows_to_csv(rows, cfg.timing))
    json_path.write_text(rows_to_json(rows, cfg))
    return csv_path, json_path

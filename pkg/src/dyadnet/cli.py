"""Command-line pipeline: ingest -> build-graph -> featurize -> run | ablate
-> analyze -> export.

Every subcommand accepts --config/--seed/--threads/--out-dir, writes a
manifest (manifest-<command>.json) recording the effective config hash and
input digests, and appends line-delimited JSON events to events.jsonl so
tests can assert on machine-readable progress.  Exit codes: 0 success,
2 usage/config error, 3 data validation error, 4 numerical/internal
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .analysis import (
    SectionPairStat, export_plot_data, pca_top2, section_pair_stats,
    welch_t_test, write_pca_csv, write_section_pairs_csv,
    write_top_unigrams_csv,
)
from .corpus import (
    load_corpus_dir, read_conflicts_jsonl, read_entities_jsonl,
    read_sections_jsonl, run_ingest, write_conflicts_jsonl,
    write_entities_jsonl, write_sections_jsonl,
)
from .errors import (
    ConfigError, DataError, DyadnetError, NumericalError,
)
from .experiments import (
    AggregateResult, f1_score, permutation_test, run_repeated,
    write_table_csv,
)
from .features import (
    document_term_bags, feature_map, featurize_corpus, read_features_jsonl,
    read_vocabulary, write_features_jsonl, write_vocabulary,
)
from .graph import (
    ALLIES, ENEMIES, build_graph, graph_stats, read_graph_json,
    write_graph_json,
)
from .manifest import RunManifest, utc_timestamp
from .models import MASKS, VARIANTS, ModelConfig
from .models import GraphTensors
from .wikitext import entity_id

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

DEFAULT_ABLATION_VARIANTS = ("D", "D1", "S", "S2", "S3", "S4")
DEFAULT_ABLATION_COMPARISONS = (("D", "D1"), ("S", "S2"), ("S", "S3"),
                                ("S", "S4"))

DEFAULT_CONFIG: Dict = {
    "ingest": {
        "category_root": None,
        "category_depth": 4,
    },
    "features": {
        "max_terms": 500,
        "df_low": 0.01,
        "df_high": 0.40,
    },
    "model": {
        "hidden": 64,
        "out_dim": 64,
        "gin_steps": 2,
        "gin_eps": 0.0,
        "node_encoder_dims": None,
        "edge_encoder_dims": None,
        "classifier_dims": None,
        "gin_update_dims": None,
    },
    "train": {
        "variants": list(VARIANTS),
        "n_runs": 10,
        "fractions": [0.6, 0.3, 0.1],
        "max_epochs": 30,
        "patience": 3,
        "batch_size": 512,
        "seed": 0,
    },
    "analyze": {
        "top_n": 1000,
        "pooled": False,
        "comparisons": [["S", "D"]],
        "n_resamples": 10000,
        "export_k": 250,
        "top_unigrams": 10,
    },
}


class EventLog:
    """Append-only line-delimited JSON event stream."""

    def __init__(self, path):
        self.path = Path(path)

    def emit(self, event: str, **fields) -> None:
        record = {"ts": utc_timestamp(), "event": event}
        record.update(fields)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=False) + "\n")


def _merge_config(defaults: Mapping, user: Mapping, trail: str) -> Dict:
    merged: Dict = {}
    for key, base in defaults.items():
        if key in user and isinstance(base, Mapping):
            sub = user[key]
            if not isinstance(sub, Mapping):
                raise ConfigError(f"config section {trail}{key} must be an "
                                  f"object")
            merged[key] = _merge_config(base, sub, f"{trail}{key}.")
        elif key in user:
            merged[key] = user[key]
        else:
            merged[key] = json.loads(json.dumps(base))  # deep copy
    for key in user:
        if key not in defaults:
            raise ConfigError(f"unknown config key: {trail}{key}")
    return merged


def load_config(path: Optional[str]) -> Dict:
    """Defaults overlaid with the user's JSON config; unknown keys error."""
    user: Dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"missing config file: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
    return _merge_config(DEFAULT_CONFIG, user, "")


def validate_config(config: Mapping) -> None:
    feats = config["features"]
    if not 0.0 <= feats["df_low"] < feats["df_high"] <= 1.0:
        raise ConfigError("features.df_low/df_high must satisfy "
                          "0 <= low < high <= 1")
    if int(feats["max_terms"]) < 1:
        raise ConfigError("features.max_terms must be positive")
    train = config["train"]
    for v in train["variants"]:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant name: {v!r}")
    if int(train["n_runs"]) < 2:
        raise ConfigError("train.n_runs must be at least 2")
    fracs = train["fractions"]
    if len(fracs) != 3 or any(f <= 0 for f in fracs):
        raise ConfigError("train.fractions must be three positive numbers")
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise ConfigError("train.fractions must sum to 1")
    for key in ("max_epochs", "patience", "batch_size"):
        if int(train[key]) < 1:
            raise ConfigError(f"train.{key} must be positive")
    model = config["model"]
    for key in ("hidden", "out_dim", "gin_steps"):
        if int(model[key]) < 1:
            raise ConfigError(f"model.{key} must be positive")
    analyze = config["analyze"]
    for key in ("top_n", "n_resamples", "export_k", "top_unigrams"):
        if int(analyze[key]) < 1:
            raise ConfigError(f"analyze.{key} must be positive")
    for pair in analyze["comparisons"]:
        if (len(pair) != 2 or pair[0] not in VARIANTS
                or pair[1] not in VARIANTS or pair[0] == pair[1]):
            raise ConfigError(f"comparison must name two distinct variants, "
                              f"got {pair!r}")


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


# --------------------------------------------------------------------------
# ingest / build-graph / featurize


def cmd_ingest(args, config, log: EventLog) -> None:
    corpus_dir = Path(args.corpus)
    index_path = corpus_dir / "index.json"
    if not index_path.is_file():
        raise ConfigError(f"missing corpus index: {index_path}")
    out_dir = Path(args.out_dir)
    inputs = [index_path] + sorted(corpus_dir.glob("*.wiki"))
    manifest = RunManifest.start("ingest", config, inputs,
                                 seed=config["train"]["seed"],
                                 threads=args.threads)
    log.emit("stage_start", command="ingest", corpus=str(corpus_dir))

    read_warnings: List[Tuple[str, str]] = []
    articles = load_corpus_dir(corpus_dir, warnings=read_warnings)

    category_root = config["ingest"]["category_root"]
    category_index = None
    if category_root is not None:
        cat_path = corpus_dir / "categories.json"
        if not cat_path.is_file():
            raise DataError(f"category filtering requested but "
                            f"{cat_path} is missing")
        category_index = json.loads(cat_path.read_text(encoding="utf-8"))

    result = run_ingest(articles, category_root=category_root,
                        category_index=category_index,
                        category_depth=config["ingest"]["category_depth"])
    for title, message in read_warnings + result.warnings:
        log.emit("ingest_warning", article=title, message=message)

    write_conflicts_jsonl(out_dir / "conflicts.jsonl", result.conflicts)
    write_entities_jsonl(out_dir / "entities.jsonl", result.entities)
    write_sections_jsonl(out_dir / "sections.jsonl", result.sections)
    manifest.extra = {"conflicts": len(result.conflicts),
                      "entities": len(result.entities),
                      "sections": len(result.sections),
                      "warnings": len(read_warnings) + len(result.warnings)}
    manifest.finish().write(out_dir / "manifest-ingest.json")
    log.emit("stage_end", command="ingest", **manifest.extra)
    print(f"conflicts {len(result.conflicts)} entities {len(result.entities)}")


def cmd_build_graph(args, config, log: EventLog) -> None:
    out_dir = Path(args.out_dir)
    conflicts_path = Path(args.conflicts or out_dir / "conflicts.jsonl")
    if not conflicts_path.is_file():
        raise DataError(f"missing conflicts file: {conflicts_path} "
                        f"(run ingest first)")
    manifest = RunManifest.start("build-graph", config, [conflicts_path],
                                 seed=config["train"]["seed"],
                                 threads=args.threads)
    log.emit("stage_start", command="build-graph")
    conflicts = read_conflicts_jsonl(conflicts_path)
    seen_ids = set()
    for c in conflicts:
        if c.conflict_id in seen_ids:
            raise DataError(f"duplicate conflict id {c.conflict_id}")
        seen_ids.add(c.conflict_id)
    graph = build_graph(conflicts)
    write_graph_json(out_dir / "graph.json", graph)
    stats = graph_stats(graph)
    manifest.extra = {"nodes": stats.node_count, "edges": stats.edge_count,
                      "ally_fraction": stats.ally_fraction}
    manifest.finish().write(out_dir / "manifest-build-graph.json")
    log.emit("stage_end", command="build-graph", **manifest.extra)
    print(f"nodes {stats.node_count} edges {stats.edge_count} "
          f"ally_fraction {stats.ally_fraction:.4f}")


def cmd_featurize(args, config, log: EventLog) -> None:
    out_dir = Path(args.out_dir)
    paths = {name: out_dir / f"{name}.jsonl"
             for name in ("sections", "conflicts", "entities")}
    for name, p in paths.items():
        if not p.is_file():
            raise DataError(f"missing {name} file: {p} (run ingest first)")
    manifest = RunManifest.start("featurize", config, paths.values(),
                                 seed=config["train"]["seed"],
                                 threads=args.threads)
    log.emit("stage_start", command="featurize")
    sectioned = read_sections_jsonl(paths["sections"])
    conflicts = read_conflicts_jsonl(paths["conflicts"])
    entities = read_entities_jsonl(paths["entities"])
    feats = config["features"]
    result = featurize_corpus(
        sectioned,
        conflict_titles=[c.conflict_title for c in conflicts],
        entity_ids=[entity_id(ref) for ref in entities],
        max_terms=feats["max_terms"], df_low=feats["df_low"],
        df_high=feats["df_high"])
    write_vocabulary(out_dir / "vocab-entity.json", result.entity_vocab)
    write_vocabulary(out_dir / "vocab-conflict.json", result.conflict_vocab)
    write_features_jsonl(out_dir / "features.jsonl", result.rows)
    manifest.extra = {"entity_terms": len(result.entity_vocab.terms),
                      "conflict_terms": len(result.conflict_vocab.terms),
                      "rows": len(result.rows)}
    manifest.finish().write(out_dir / "manifest-featurize.json")
    log.emit("stage_end", command="featurize", **manifest.extra)
    print(f"entity_terms {len(result.entity_vocab.terms)} "
          f"conflict_terms {len(result.conflict_vocab.terms)} "
          f"rows {len(result.rows)}")


# --------------------------------------------------------------------------
# run / ablate


def _load_tensors(out_dir: Path, args, variants: Sequence[str]
                  ) -> Tuple[GraphTensors, List[Path]]:
    """Graph + features as training tensors, with per-variant pre-flight.

    A variant whose mask consumes node (edge) features fails fast when any
    graph node (edge conflict) lacks a feature vector; vectors never read
    by any requested variant are zero-filled instead.
    """
    graph_path = Path(args.graph or out_dir / "graph.json")
    features_path = Path(args.features or out_dir / "features.jsonl")
    conflicts_path = Path(args.conflicts or out_dir / "conflicts.jsonl")
    for p, stage in ((graph_path, "build-graph"), (features_path, "featurize"),
                     (conflicts_path, "ingest")):
        if not p.is_file():
            raise DataError(f"missing input: {p} (run {stage} first)")

    graph = read_graph_json(graph_path)
    if not graph.edges:
        raise DataError("graph has no edges; nothing to train on")
    rows = read_features_jsonl(features_path)
    conflicts = read_conflicts_jsonl(conflicts_path)
    id_to_title = {c.conflict_id: c.conflict_title for c in conflicts}

    node_vecs = feature_map(rows, doc_ids=graph.nodes)
    title_vecs = feature_map(rows, doc_ids=id_to_title.values())
    needed_cids = sorted({cid for e in graph.edges for cid in e.conflict_ids})

    needs_node = any(MASKS[v].needs_node_encoder for v in variants
                     if v != "MAJ")
    needs_edge = any(MASKS[v].needs_edge_encoder for v in variants
                     if v != "MAJ")
    missing_nodes = [n for n in graph.nodes if n not in node_vecs]
    missing_cids = [cid for cid in needed_cids
                    if id_to_title.get(cid) not in title_vecs]
    if needs_node and missing_nodes:
        wanting = [v for v in variants
                   if v != "MAJ" and MASKS[v].needs_node_encoder]
        raise DataError(
            f"variants {wanting} need node features but "
            f"{len(missing_nodes)} entities have none "
            f"(first: {missing_nodes[:3]})")
    if needs_edge and missing_cids:
        wanting = [v for v in variants
                   if v != "MAJ" and MASKS[v].needs_edge_encoder]
        raise DataError(
            f"variants {wanting} need edge features but "
            f"{len(missing_cids)} conflicts have none "
            f"(first: {missing_cids[:3]})")

    node_dim = (len(next(iter(node_vecs.values()))) if node_vecs else 1)
    edge_dim = (len(next(iter(title_vecs.values()))) if title_vecs else 1)
    node_features = {n: node_vecs.get(n, np.zeros(node_dim))
                     for n in graph.nodes}
    conflict_vectors = {}
    for cid in needed_cids:
        vec = title_vecs.get(id_to_title.get(cid))
        conflict_vectors[cid] = (np.asarray(vec) if vec is not None
                                 else np.zeros(edge_dim))
    gt = GraphTensors.from_graph(graph, node_features, conflict_vectors)
    return gt, [graph_path, features_path, conflicts_path]


def _variant_config(variant: str, node_dim: int, edge_dim: int,
                    model_cfg: Mapping, seed: int) -> ModelConfig:
    if variant == "MAJ":
        return ModelConfig("MAJ", (), (), (), seed=seed)
    hidden = int(model_cfg["hidden"])
    out_dim = int(model_cfg["out_dim"])

    def dims(key, default):
        value = model_cfg[key]
        return tuple(int(d) for d in value) if value else default

    return ModelConfig(
        variant=variant,
        node_encoder_dims=dims("node_encoder_dims", (node_dim, hidden)),
        edge_encoder_dims=dims("edge_encoder_dims", (edge_dim, hidden)),
        classifier_dims=dims("classifier_dims", (hidden, out_dim)),
        gin_update_dims=dims("gin_update_dims", (hidden, hidden)),
        gin_steps=int(model_cfg["gin_steps"]),
        gin_eps=float(model_cfg["gin_eps"]),
        seed=seed)


def _execute_runs(args, config, log: EventLog, variants: Sequence[str],
                  comparisons: Sequence[Sequence[str]], suffix: str) -> None:
    out_dir = Path(args.out_dir)
    for pair in comparisons:
        for v in pair:
            if v not in variants:
                raise ConfigError(f"comparison {list(pair)} references "
                                  f"variant {v!r} not in the run list")
    gt, inputs = _load_tensors(out_dir, args, variants)
    manifest = RunManifest.start("run" + suffix, config, inputs,
                                 seed=config["train"]["seed"],
                                 threads=args.threads)
    train_cfg = config["train"]
    seed = int(train_cfg["seed"])
    fractions = tuple(float(f) for f in train_cfg["fractions"])
    log.emit("stage_start", command="run" + suffix, variants=list(variants),
             n_runs=train_cfg["n_runs"], edges=gt.n_edges)

    def run_one(variant: str) -> AggregateResult:
        cfg = _variant_config(variant, gt.X.shape[1], gt.Xe.shape[1],
                              config["model"], seed)
        return run_repeated(cfg, gt, n_runs=int(train_cfg["n_runs"]),
                            fractions=fractions, seed_base=seed,
                            max_epochs=int(train_cfg["max_epochs"]),
                            patience=int(train_cfg["patience"]),
                            batch_size=int(train_cfg["batch_size"]))

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            aggregates = list(pool.map(run_one, variants))
    else:
        aggregates = [run_one(v) for v in variants]
    by_variant = dict(zip(variants, aggregates))
    for agg in aggregates:
        log.emit("variant_done", variant=agg.variant, mean=agg.mean,
                 sd=agg.sd)

    comparison_rows = []
    for a, b in comparisons:
        agg_a, agg_b = by_variant[a], by_variant[b]
        preds_a, preds_b, gold = [], [], []
        for rep_a, rep_b in zip(agg_a.reports, agg_b.reports):
            if rep_a.test_gold != rep_b.test_gold:
                raise DyadnetError(
                    f"comparison {a} vs {b}: test splits disagree")
            preds_a.extend(rep_a.test_predictions)
            preds_b.extend(rep_b.test_predictions)
            gold.extend(rep_a.test_gold)
        p_value = permutation_test(
            preds_a, preds_b, gold,
            n_resamples=int(config["analyze"]["n_resamples"]), seed=seed)
        observed = abs(f1_score(preds_a, gold) - f1_score(preds_b, gold))
        comparison_rows.append({
            "a": a, "b": b, "pooled_f1_a": f1_score(preds_a, gold),
            "pooled_f1_b": f1_score(preds_b, gold),
            "observed_diff": observed, "p_value": p_value,
            "n_resamples": int(config["analyze"]["n_resamples"])})
        log.emit("comparison_done", a=a, b=b, p_value=p_value)

    _write_json(out_dir / f"report{suffix}.json",
                {agg.variant: agg.to_dict() for agg in aggregates})
    _write_json(out_dir / f"aggregate{suffix}.json",
                {"table": [{"variant": agg.variant, "mean": agg.mean,
                            "sd": agg.sd, "f1_scores": agg.f1_scores}
                           for agg in aggregates],
                 "comparisons": comparison_rows})
    table_name = "table3.csv" if not suffix else f"table{suffix}.csv"
    write_table_csv(out_dir / table_name, aggregates)
    manifest.extra = {"variants": list(variants),
                      "means": {agg.variant: agg.mean for agg in aggregates}}
    manifest.finish().write(out_dir / f"manifest-run{suffix}.json")
    log.emit("stage_end", command="run" + suffix)
    for agg in aggregates:
        print(f"{agg.variant} {agg.mean:.6f} +/- {agg.sd:.6f}")
    for row in comparison_rows:
        print(f"{row['a']} vs {row['b']} p={row['p_value']:.6f}")


def cmd_run(args, config, log: EventLog) -> None:
    variants = tuple(config["train"]["variants"])
    comparisons = [tuple(p) for p in config["analyze"]["comparisons"]]
    _execute_runs(args, config, log, variants, comparisons, "")


def cmd_ablate(args, config, log: EventLog) -> None:
    requested = tuple(config["train"]["variants"])
    if requested != tuple(DEFAULT_CONFIG["train"]["variants"]):
        variants = requested  # explicit config wins
    else:
        variants = DEFAULT_ABLATION_VARIANTS
    comparisons = [p for p in DEFAULT_ABLATION_COMPARISONS
                   if p[0] in variants and p[1] in variants]
    _execute_runs(args, config, log, variants, comparisons, "-ablation")


# --------------------------------------------------------------------------
# analyze / export


def cmd_analyze(args, config, log: EventLog) -> None:
    out_dir = Path(args.out_dir)
    paths = {
        "graph": Path(args.graph or out_dir / "graph.json"),
        "features": Path(args.features or out_dir / "features.jsonl"),
        "sections": out_dir / "sections.jsonl",
        "conflicts": Path(args.conflicts or out_dir / "conflicts.jsonl"),
        "vocab_entity": out_dir / "vocab-entity.json",
        "vocab_conflict": out_dir / "vocab-conflict.json",
    }
    for name, p in paths.items():
        if not p.is_file():
            raise DataError(f"missing analyze input: {p}")
    manifest = RunManifest.start("analyze", config, paths.values(),
                                 seed=config["train"]["seed"],
                                 threads=args.threads)
    acfg = config["analyze"]
    log.emit("stage_start", command="analyze")

    graph = read_graph_json(paths["graph"])
    rows = read_features_jsonl(paths["features"])
    sectioned = read_sections_jsonl(paths["sections"])
    conflicts = read_conflicts_jsonl(paths["conflicts"])
    entity_vocab = read_vocabulary(paths["vocab_entity"])
    conflict_vocab = read_vocabulary(paths["vocab_conflict"])

    section_vecs = feature_map(rows, doc_ids=graph.nodes, sections=True)
    stats, skipped = section_pair_stats(graph, section_vecs,
                                        top_n=int(acfg["top_n"]),
                                        pooled=bool(acfg["pooled"]))
    write_section_pairs_csv(out_dir / "section_pairs.csv", stats)

    ally_means = [s.mean_distance for s in stats if s.relation == ALLIES]
    enemy_means = [s.mean_distance for s in stats if s.relation == ENEMIES]
    welch = None
    if len(ally_means) >= 2 and len(enemy_means) >= 2:
        t_stat, p_value = welch_t_test(ally_means, enemy_means)
        welch = {"t": t_stat, "p": p_value,
                 "n_ally_pairs": len(ally_means),
                 "n_enemy_pairs": len(enemy_means)}

    article_vecs = feature_map(rows, doc_ids=graph.nodes)
    order = [n for n in graph.nodes if n in article_vecs]
    projections, eigenvalues = pca_top2([article_vecs[n] for n in order],
                                        ids=order)
    write_pca_csv(out_dir / "pca.csv", projections)

    bags = document_term_bags(sectioned)
    merged: Dict[str, Dict[str, int]] = {}
    for title, sec_bags in bags.items():
        total: Dict[str, int] = {}
        for _, bag in sec_bags:
            for term, count in bag.items():
                total[term] = total.get(term, 0) + count
        merged[title] = total
    k = int(acfg["top_unigrams"])
    entity_docs = {n: merged[n] for n in graph.nodes if n in merged}
    conflict_docs = {c.conflict_title: merged[c.conflict_title]
                     for c in conflicts if c.conflict_title in merged}
    write_top_unigrams_csv(out_dir / "top_unigrams.csv", entity_docs,
                           entity_vocab, k=k)
    write_top_unigrams_csv(out_dir / "top_unigrams_conflicts.csv",
                           conflict_docs, conflict_vocab, k=k)

    summary = {
        "pair_counts": {ALLIES: len(ally_means), ENEMIES: len(enemy_means)},
        "skipped_zero_vector_samples": skipped,
        "welch": welch,
        "pca_eigenvalues": list(eigenvalues),
        "pca_points": len(projections),
    }
    _write_json(out_dir / "analyze.json", summary)
    manifest.extra = {"ally_pairs": len(ally_means),
                      "enemy_pairs": len(enemy_means), "skipped": skipped}
    manifest.finish().write(out_dir / "manifest-analyze.json")
    log.emit("stage_end", command="analyze", **manifest.extra)
    if welch is None:
        print(f"pairs ally {len(ally_means)} enemy {len(enemy_means)} "
              f"(too few for a t-test)")
    else:
        print(f"pairs ally {len(ally_means)} enemy {len(enemy_means)} "
              f"welch_t {welch['t']:.4f} p {welch['p']:.6f}")


def _read_section_pairs_csv(path) -> List[SectionPairStat]:
    stats = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            stats.append(SectionPairStat(
                title_a=row["title_a"], title_b=row["title_b"],
                relation=row["relation"],
                co_occurrence_count=int(row["count"]),
                mean_distance=float(row["mean_distance"]),
                sd_distance=float(row["sd_distance"])))
    return stats


def cmd_export(args, config, log: EventLog) -> None:
    out_dir = Path(args.out_dir)
    pairs_path = out_dir / "section_pairs.csv"
    if not pairs_path.is_file():
        raise DataError(f"missing {pairs_path} (run analyze first)")
    manifest = RunManifest.start("export", config, [pairs_path],
                                 seed=config["train"]["seed"],
                                 threads=args.threads)
    log.emit("stage_start", command="export")
    stats = _read_section_pairs_csv(pairs_path)
    ranked = export_plot_data(stats, k=int(config["analyze"]["export_k"]))
    write_section_pairs_csv(out_dir / "export_pairs.csv", ranked)
    manifest.extra = {"rows": len(ranked)}
    manifest.finish().write(out_dir / "manifest-export.json")
    log.emit("stage_end", command="export", rows=len(ranked))
    print(f"export rows {len(ranked)}")


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=None,
                        help="JSON config file (defaults used when omitted)")
    shared.add_argument("--seed", type=int, default=None,
                        help="override train.seed")
    shared.add_argument("--threads", type=int, default=1,
                        help="intra-stage worker threads")
    shared.add_argument("--out-dir", default="out",
                        help="output directory (default: ./out)")

    parser = argparse.ArgumentParser(
        prog="dyadnet",
        description="Signed ally/enemy dyad-graph pipeline: extraction, "
                    "features, edge classifiers, analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[shared],
                       help="parse a corpus directory into JSONL records")
    p.add_argument("corpus", help="corpus directory containing index.json")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-graph", parents=[shared],
                       help="aggregate conflict dyads into the signed graph")
    p.add_argument("--conflicts", default=None,
                   help="conflicts.jsonl (default: <out-dir>/conflicts.jsonl)")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("featurize", parents=[shared],
                       help="build vocabularies and tf-idf feature rows")
    p.set_defaults(func=cmd_featurize)

    for name, func, help_text in (
            ("run", cmd_run, "train and evaluate the configured variants"),
            ("ablate", cmd_ablate, "train and evaluate ablation variants")):
        p = sub.add_parser(name, parents=[shared], help=help_text)
        p.add_argument("--graph", default=None)
        p.add_argument("--features", default=None)
        p.add_argument("--conflicts", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("analyze", parents=[shared],
                       help="section-pair distances, t-test, PCA, unigrams")
    p.add_argument("--graph", default=None)
    p.add_argument("--features", default=None)
    p.add_argument("--conflicts", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export", parents=[shared],
                       help="rank analyzer output for plotting")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config["train"]["seed"] = int(args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        validate_config(config)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log = EventLog(out_dir / "events.jsonl")
        args.func(args, config, log)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DyadnetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # defensive: unexpected failure is internal
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

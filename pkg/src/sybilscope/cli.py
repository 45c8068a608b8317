"""Command-line pipeline: synth | ingest | extract | train | score | eval | report.

Every command is deterministic given identical inputs and seeds, writing
byte-identical outputs.  Exit codes are a stable contract for CI: 0 success,
1 usage error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

from . import dataio
from .config import PipelineConfig, load_config, save_config
from .errors import DataError, SingleClassInput, UsageError
from .features import FEATURE_NAMES, build_feature_matrix, feature_name_manifest
from .graph import build_graph, extract_layers, subgraph_to_json
from .ingest import clean, read_transaction_file, write_transactions
from .labels import FileLabelProvider, load_labels
from .metrics import (
    ScoredDataset,
    best_f1_threshold,
    evaluate,
    metrics_table,
    stratified_split,
)
from .model import (
    feature_importance,
    load_model,
    save_model,
    train_decision_tree,
    train_gbdt,
)
from .synth import SynthSpec, default_benchmark_spec, generate, write_dataset


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--out", help="output directory override")
    common.add_argument("--strict", action="store_true", default=None,
                        help="abort on malformed rows and partial label responses")

    parser = _Parser(prog="sybilscope", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a labeled synthetic dataset")
    p.add_argument("--spec", help="dataset spec JSON (default: canonical benchmark)")

    p = sub.add_parser("ingest", parents=[common], help="parse, clean, and report")
    p.add_argument("--records", help="records file override")

    p = sub.add_parser("extract", parents=[common], help="compute the feature matrix")
    p.add_argument("--records", help="records file override")
    p.add_argument("--workers", type=int, help="extraction worker processes")

    p = sub.add_parser("train", parents=[common], help="train a model on labeled features")
    p.add_argument("--features", help="feature matrix CSV (default <out>/features.csv)")
    p.add_argument("--model-type", choices=("gbdt", "dt"), default="gbdt")

    p = sub.add_parser("score", parents=[common], help="score addresses with a trained model")
    p.add_argument("--model", help="model file (default <out>/model.json)")
    p.add_argument("--features", help="feature matrix CSV")

    p = sub.add_parser("eval", parents=[common], help="metrics for a scored file")
    p.add_argument("--scores", help="scores CSV (default <out>/scores.csv)")
    p.add_argument("--truth", help="ground-truth labels CSV")
    p.add_argument("--threshold", type=float, help="decision threshold override")

    p = sub.add_parser("report", parents=[common], help="importance table, metrics, figures")
    p.add_argument("--model", help="model file (default <out>/model.json)")
    p.add_argument("--features", help="feature matrix CSV")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--dump-subgraph", metavar="ADDRESS",
                   help="also dump the layered subgraph of one address as JSON")

    return parser


def _load_pipeline(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.paths.out_dir = args.out
    if args.strict is not None:
        cfg.strict = args.strict
    if getattr(args, "records", None):
        cfg.paths.records = args.records
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    if getattr(args, "threshold", None) is not None:
        cfg.threshold = args.threshold
    return cfg


def _out_path(cfg: PipelineConfig, name: str) -> str:
    os.makedirs(cfg.paths.out_dir, exist_ok=True)
    return os.path.join(cfg.paths.out_dir, name)


def _prepare(cfg: PipelineConfig):
    """Parse records, label, clean; returns (candidates, records, report, parse errors)."""
    records, parse_errors = read_transaction_file(
        cfg.paths.records, cfg.record_format, strict=cfg.strict
    )
    labels = {}
    if cfg.paths.address_labels:
        provider = FileLabelProvider(cfg.paths.address_labels)
        observed = {r.input_address for r in records} | {r.output_address for r in records}
        labels = load_labels(provider, observed, strict=cfg.strict)
    candidates, retained, report = clean(
        records, labels, max_lifecycle=cfg.max_lifecycle_seconds, strict=cfg.strict
    )
    return candidates, retained, report, parse_errors


def _activity_set(cfg: PipelineConfig) -> set[str]:
    if cfg.paths.activity_addresses:
        return dataio.read_address_set(cfg.paths.activity_addresses)
    return set()


def cmd_synth(args) -> int:
    cfg = _load_pipeline(args)
    spec = SynthSpec.from_json_file(args.spec) if args.spec else default_benchmark_spec()
    if args.seed is not None:
        spec.rng_seed = args.seed
    out_dir = args.out or cfg.paths.out_dir
    dataset = generate(spec)
    paths = write_dataset(dataset, out_dir)
    with open(os.path.join(out_dir, "spec.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_sybil = len(dataset.sybil_addresses)
    print(
        f"synth: {len(dataset.records)} records, {len(dataset.labels)} labeled addresses "
        f"({n_sybil} sybil) -> {out_dir}"
    )
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _load_pipeline(args)
    candidates, retained, report, parse_errors = _prepare(cfg)
    write_transactions(_out_path(cfg, "cleaned_records.csv"), retained, fmt="csv")
    with open(_out_path(cfg, "candidates.txt"), "w", encoding="utf-8") as fh:
        for addr in sorted(candidates):
            fh.write(addr + "\n")
    with open(_out_path(cfg, "cleaning_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if parse_errors:
        with open(_out_path(cfg, "parse_report.json"), "w", encoding="utf-8") as fh:
            json.dump(
                [{"line": e.line, "reason": e.reason} for e in parse_errors],
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
    print(
        f"ingest: {report.retained_transactions} records kept, "
        f"{report.retained_candidates}/{report.total_addresses} candidate addresses "
        f"({len(parse_errors)} malformed rows skipped)"
    )
    return 0


def cmd_extract(args) -> int:
    cfg = _load_pipeline(args)
    candidates, retained, report, _ = _prepare(cfg)
    graph = build_graph(retained)
    addresses, matrix = build_feature_matrix(
        graph,
        candidates,
        activity_addresses=_activity_set(cfg),
        native_coins=cfg.native_coins,
        hub_cap=cfg.hub_cap,
        n_workers=cfg.workers,
    )
    truth = dataio.read_ground_truth(cfg.paths.ground_truth) if cfg.paths.ground_truth else None
    features_path = _out_path(cfg, "features.csv")
    dataio.write_feature_matrix(features_path, addresses, matrix, truth)
    with open(_out_path(cfg, "feature_names.json"), "w", encoding="utf-8") as fh:
        fh.write(feature_name_manifest())
        fh.write("\n")
    print(f"extract: {len(addresses)} addresses x {matrix.shape[1]} features -> {features_path}")
    return 0


def _labeled_matrix(path):
    addresses, matrix, labels = dataio.read_feature_matrix(path)
    if labels is None:
        raise DataError(f"{path}: no label column; extract with paths.ground_truth set")
    keep = labels >= 0
    dropped = int((~keep).sum())
    if dropped:
        print(f"note: dropping {dropped} unlabeled rows", file=sys.stderr)
    addresses = [a for a, k in zip(addresses, keep) if k]
    return addresses, matrix[keep], labels[keep]


def cmd_train(args) -> int:
    cfg = _load_pipeline(args)
    features_path = args.features or _out_path(cfg, "features.csv")
    addresses, matrix, labels = _labeled_matrix(features_path)
    if len(set(labels.tolist())) < 2:
        raise SingleClassInput("labeled rows contain a single class")

    train_addrs, test_addrs = stratified_split(
        addresses, labels.tolist(), cfg.split.test_fraction, cfg.split_seed()
    )
    index = {a: i for i, a in enumerate(addresses)}
    train_idx = [index[a] for a in train_addrs]
    test_idx = [index[a] for a in test_addrs]

    train_cfg = cfg.resolved_train_config()
    trainer = train_gbdt if args.model_type == "gbdt" else train_decision_tree
    model = trainer(matrix[train_idx], labels[train_idx], train_cfg)
    model.feature_names = list(FEATURE_NAMES)

    scores = model.predict_proba(matrix[test_idx])
    data = ScoredDataset.from_arrays(test_addrs, scores, labels[test_idx])
    report = evaluate(data, cfg.threshold)
    t_best, f1_best = best_f1_threshold(data)

    model_path = _out_path(cfg, "model.json")
    save_model(model, model_path)
    metrics_path = _out_path(cfg, "metrics.json")
    payload = {
        "method": model.model_type,
        "metrics": report.to_dict(),
        "best_f1": {"threshold": t_best, "f1": f1_best},
        "n_train": len(train_idx),
        "n_test": len(test_idx),
        "split_seed": cfg.split_seed(),
        "threshold": cfg.threshold,
    }
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(metrics_table([(model.model_type, report)]))
    print(f"train: model -> {model_path}, metrics -> {metrics_path}")
    return 0


def cmd_score(args) -> int:
    cfg = _load_pipeline(args)
    model = load_model(args.model or _out_path(cfg, "model.json"))
    features_path = args.features or _out_path(cfg, "features.csv")
    addresses, matrix, _ = dataio.read_feature_matrix(features_path)
    scores = model.predict_proba(matrix) if len(addresses) else []
    scores_path = _out_path(cfg, "scores.csv")
    dataio.write_scores(scores_path, addresses, scores)
    print(f"score: {len(addresses)} addresses -> {scores_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_pipeline(args)
    scores_path = args.scores or _out_path(cfg, "scores.csv")
    truth_path = args.truth or cfg.paths.ground_truth
    if not truth_path:
        raise UsageError("eval needs --truth or paths.ground_truth")
    scores = dataio.read_scores(scores_path)
    truth = dataio.read_ground_truth(truth_path)
    rows = sorted(set(scores) & set(truth))
    if not rows:
        raise DataError("no addresses shared between scores and ground truth")
    data = ScoredDataset.from_arrays(
        rows, [scores[a] for a in rows], [truth[a] for a in rows]
    )
    report = evaluate(data, cfg.threshold)
    t_best, f1_best = best_f1_threshold(data)
    payload = {
        "metrics": report.to_dict(),
        "best_f1": {"threshold": t_best, "f1": f1_best},
        "n_rows": len(rows),
    }
    with open(_out_path(cfg, "eval.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(metrics_table([("scored", report)]))
    print(f"best F1 {f1_best:.4f} at threshold {t_best:.4f}")
    return 0


def cmd_report(args) -> int:
    from . import plots  # matplotlib is heavy; keep it off the other commands

    cfg = _load_pipeline(args)
    model = load_model(args.model or _out_path(cfg, "model.json"))
    features_path = args.features or _out_path(cfg, "features.csv")
    addresses, matrix, labels = _labeled_matrix(features_path)

    _, test_addrs = stratified_split(
        addresses, labels.tolist(), cfg.split.test_fraction, cfg.split_seed()
    )
    index = {a: i for i, a in enumerate(addresses)}
    test_idx = [index[a] for a in test_addrs]
    scores = model.predict_proba(matrix[test_idx])
    data = ScoredDataset.from_arrays(test_addrs, scores, labels[test_idx])
    report = evaluate(data, cfg.threshold)
    t_best, f1_best = best_f1_threshold(data)

    ranking = feature_importance(model)
    top_k = max(0, min(args.top_k, len(FEATURE_NAMES)))
    top = ranking[:top_k]

    importance_path = _out_path(cfg, "importance.csv")
    with open(importance_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("rank,feature,total_gain\n")
        for rank, (name, gain) in enumerate(top, start=1):
            fh.write(f"{rank},{name},{gain!r}\n")

    table = metrics_table([(model.model_type, report)])
    with open(_out_path(cfg, "metrics_table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")

    payload = {
        "method": model.model_type,
        "metrics": report.to_dict(),
        "best_f1": {"threshold": t_best, "f1": f1_best},
        "top_features": [{"feature": n, "total_gain": g} for n, g in top],
        "n_test": len(test_addrs),
    }
    with open(_out_path(cfg, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    plots.save_importance_chart(ranking, _out_path(cfg, "importance.png"), top_k=args.top_k)
    plots.save_roc_curve(data.scores, data.labels, report.auc, _out_path(cfg, "roc.png"))
    plots.save_score_histogram(data.scores, data.labels, _out_path(cfg, "scores.png"))

    if args.dump_subgraph:
        records, _ = read_transaction_file(cfg.paths.records, cfg.record_format)
        graph = build_graph(records)
        sg = extract_layers(graph, args.dump_subgraph, cfg.hub_cap)
        dump_path = _out_path(cfg, f"subgraph_{args.dump_subgraph[:16]}.json")
        with open(dump_path, "w", encoding="utf-8") as fh:
            fh.write(subgraph_to_json(sg))
            fh.write("\n")
        print(f"subgraph dump -> {dump_path}")

    print(table)
    print(f"best F1 {f1_best:.4f} at threshold {t_best:.4f}")
    print(f"top {len(top)} features:")
    for rank, (name, gain) in enumerate(top, start=1):
        print(f"  {rank:>2}. {name:<36} {gain:.4f}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required (see --help)")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        raise
    except Exception:
        traceback.print_exc()
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
